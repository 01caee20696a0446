#pragma once

#include "inkline/augment.hpp"
#include "inkline/autodiff.hpp"
#include "inkline/checkpoint.hpp"
#include "inkline/convnets.hpp"
#include "inkline/data.hpp"
#include "inkline/decode.hpp"
#include "inkline/evalkit.hpp"
#include "inkline/image.hpp"
#include "inkline/nn.hpp"
#include "inkline/normalize.hpp"
#include "inkline/rng.hpp"
#include "inkline/seq2seq.hpp"
#include "inkline/tensor.hpp"
#include "inkline/train.hpp"
