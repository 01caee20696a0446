#pragma once

#include <memory>

#include "inkline/autodiff.hpp"

namespace inkline {

// SAME zero padding for a given stride: output ceil(n/stride).
inline size_t conv_out_dim(size_t n, size_t stride) { return (n + stride - 1) / stride; }

inline int same_pad(size_t n, size_t k, size_t stride) {
    size_t out = conv_out_dim(n, stride);
    long total = static_cast<long>((out - 1) * stride + k) - static_cast<long>(n);
    return total > 0 ? static_cast<int>(total / 2) : 0;
}

// Cross-correlation over [h,w,c_in] with kernel [k,k,c_in,c_out], zero
// padding preserving ceil(dim/stride), optional bias.
inline Var conv2d(Graph& g, Var x, Var kernel, Var bias = {-1}, size_t stride = 1) {
    const Tensor& in = g.val(x);
    const Tensor& K = g.val(kernel);
    if (in.shape.size() != 3 || K.shape.size() != 4) throw std::invalid_argument("conv2d: need [h,w,c] and [k,k,ci,co]");
    size_t h = in.shape[0], w = in.shape[1], ci = in.shape[2];
    size_t k = K.shape[0];
    if (K.shape[1] != k || (k % 2) == 0) throw std::invalid_argument("conv2d: kernel must be square and odd");
    if (K.shape[2] != ci) throw std::invalid_argument("conv2d: channel mismatch");
    size_t co = K.shape[3];
    size_t oh = conv_out_dim(h, stride), ow = conv_out_dim(w, stride);
    int pad_y = same_pad(h, k, stride), pad_x = same_pad(w, k, stride);

    Tensor out({oh, ow, co});
    if (bias.id >= 0) {
        const Tensor& b = g.val(bias);
        if (b.size() != co) throw std::invalid_argument("conv2d: bias size mismatch");
        for (size_t i = 0; i < oh * ow; ++i)
            for (size_t c = 0; c < co; ++c) out.v[i * co + c] = b[c];
    }
    for (size_t oy = 0; oy < oh; ++oy)
        for (size_t ox = 0; ox < ow; ++ox) {
            double* orow = &out.v[(oy * ow + ox) * co];
            for (size_t ky = 0; ky < k; ++ky) {
                long iy = static_cast<long>(oy * stride + ky) - pad_y;
                if (iy < 0 || iy >= static_cast<long>(h)) continue;
                for (size_t kx = 0; kx < k; ++kx) {
                    long ix = static_cast<long>(ox * stride + kx) - pad_x;
                    if (ix < 0 || ix >= static_cast<long>(w)) continue;
                    const double* irow = &in.v[(iy * w + ix) * ci];
                    const double* krow = &K.v[((ky * k + kx) * ci) * co];
                    for (size_t c = 0; c < ci; ++c) {
                        double xv = irow[c];
                        if (xv == 0.0) continue;
                        const double* kc = krow + c * co;
                        for (size_t o = 0; o < co; ++o) orow[o] += xv * kc[o];
                    }
                }
            }
        }

    return g.make(std::move(out), [&g, x, kernel, bias, h, w, ci, k, co, oh, ow, stride, pad_y, pad_x](Var y) {
        const Tensor& gy = g.grad(y);
        const Tensor& in = g.val(x);
        const Tensor& K = g.val(kernel);
        Tensor& gx = g.grad(x);
        Tensor& gk = g.grad(kernel);
        for (size_t oy = 0; oy < oh; ++oy)
            for (size_t ox = 0; ox < ow; ++ox) {
                const double* grow = &gy.v[(oy * ow + ox) * co];
                for (size_t ky = 0; ky < k; ++ky) {
                    long iy = static_cast<long>(oy * stride + ky) - pad_y;
                    if (iy < 0 || iy >= static_cast<long>(h)) continue;
                    for (size_t kx = 0; kx < k; ++kx) {
                        long ix = static_cast<long>(ox * stride + kx) - pad_x;
                        if (ix < 0 || ix >= static_cast<long>(w)) continue;
                        const double* irow = &in.v[(iy * w + ix) * ci];
                        double* gxrow = &gx.v[(iy * w + ix) * ci];
                        const double* krow = &K.v[((ky * k + kx) * ci) * co];
                        double* gkrow = &gk.v[((ky * k + kx) * ci) * co];
                        for (size_t c = 0; c < ci; ++c) {
                            const double* kc = krow + c * co;
                            double* gkc = gkrow + c * co;
                            double xv = irow[c], acc = 0;
                            for (size_t o = 0; o < co; ++o) {
                                acc += grow[o] * kc[o];
                                gkc[o] += xv * grow[o];
                            }
                            gxrow[c] += acc;
                        }
                    }
                }
            }
        if (bias.id >= 0) {
            Tensor& gb = g.grad(bias);
            for (size_t i = 0; i < oh * ow; ++i)
                for (size_t c = 0; c < co; ++c) gb[c] += gy.v[i * co + c];
        }
    });
}

// 2x2, stride 2, ragged edges pooled over the smaller window; gradient goes
// to the argmax (first in scan order on ties).
inline Var maxpool2(Graph& g, Var x) {
    const Tensor& in = g.val(x);
    if (in.shape.size() != 3) throw std::invalid_argument("maxpool2: need [h,w,c]");
    size_t h = in.shape[0], w = in.shape[1], c = in.shape[2];
    size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
    Tensor out({oh, ow, c});
    auto argmax = std::make_shared<std::vector<size_t>>(oh * ow * c);
    for (size_t oy = 0; oy < oh; ++oy)
        for (size_t ox = 0; ox < ow; ++ox)
            for (size_t ch = 0; ch < c; ++ch) {
                double best = 0;
                size_t best_i = 0;
                bool first = true;
                for (size_t dy = 0; dy < 2; ++dy) {
                    size_t iy = oy * 2 + dy;
                    if (iy >= h) break;
                    for (size_t dx = 0; dx < 2; ++dx) {
                        size_t ix = ox * 2 + dx;
                        if (ix >= w) break;
                        size_t idx = (iy * w + ix) * c + ch;
                        if (first || in.v[idx] > best) {
                            best = in.v[idx];
                            best_i = idx;
                            first = false;
                        }
                    }
                }
                size_t oidx = (oy * ow + ox) * c + ch;
                out.v[oidx] = best;
                (*argmax)[oidx] = best_i;
            }
    return g.make(std::move(out), [&g, x, argmax](Var y) {
        const Tensor& gy = g.grad(y);
        Tensor& gx = g.grad(x);
        for (size_t i = 0; i < gy.size(); ++i) gx[(*argmax)[i]] += gy[i];
    });
}

// Stride-2 spatial subsample (parameter-free residual skip for downsampling
// modules; channel count unchanged).
inline Var subsample2(Graph& g, Var x) {
    const Tensor& in = g.val(x);
    if (in.shape.size() != 3) throw std::invalid_argument("subsample2: need [h,w,c]");
    size_t h = in.shape[0], w = in.shape[1], c = in.shape[2];
    size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
    Tensor out({oh, ow, c});
    for (size_t oy = 0; oy < oh; ++oy)
        for (size_t ox = 0; ox < ow; ++ox)
            for (size_t ch = 0; ch < c; ++ch) out.v[(oy * ow + ox) * c + ch] = in.v[(oy * 2 * w + ox * 2) * c + ch];
    return g.make(std::move(out), [&g, x, oh, ow, w, c](Var y) {
        const Tensor& gy = g.grad(y);
        Tensor& gx = g.grad(x);
        for (size_t oy = 0; oy < oh; ++oy)
            for (size_t ox = 0; ox < ow; ++ox)
                for (size_t ch = 0; ch < c; ++ch)
                    gx[(oy * 2 * w + ox * 2) * c + ch] += gy.v[(oy * ow + ox) * c + ch];
    });
}

// Per-channel batch normalization over the spatial field. Training mode uses
// batch statistics (and updates the running ones, momentum 0.9); eval mode
// uses the running statistics. eps = 1e-5.
inline Var batchnorm(Graph& g, Var x, Var gamma, Var beta, Tensor& run_mean, Tensor& run_var,
                     double eps = 1e-5, double momentum = 0.9) {
    const Tensor& in = g.val(x);
    if (in.shape.size() != 3) throw std::invalid_argument("batchnorm: need [h,w,c]");
    size_t c = in.shape[2];
    size_t n = in.shape[0] * in.shape[1];
    if (g.val(gamma).size() != c || g.val(beta).size() != c || run_mean.size() != c || run_var.size() != c)
        throw std::invalid_argument("batchnorm: channel mismatch");
    const Tensor& gam = g.val(gamma);
    const Tensor& bet = g.val(beta);

    auto mean = std::make_shared<std::vector<double>>(c, 0.0);
    auto var = std::make_shared<std::vector<double>>(c, 0.0);
    if (g.training) {
        for (size_t i = 0; i < n; ++i)
            for (size_t ch = 0; ch < c; ++ch) (*mean)[ch] += in.v[i * c + ch];
        for (size_t ch = 0; ch < c; ++ch) (*mean)[ch] /= n;
        for (size_t i = 0; i < n; ++i)
            for (size_t ch = 0; ch < c; ++ch) {
                double d = in.v[i * c + ch] - (*mean)[ch];
                (*var)[ch] += d * d;
            }
        for (size_t ch = 0; ch < c; ++ch) (*var)[ch] /= n;
        for (size_t ch = 0; ch < c; ++ch) {
            run_mean[ch] = momentum * run_mean[ch] + (1 - momentum) * (*mean)[ch];
            run_var[ch] = momentum * run_var[ch] + (1 - momentum) * (*var)[ch];
        }
    } else {
        for (size_t ch = 0; ch < c; ++ch) {
            (*mean)[ch] = run_mean[ch];
            (*var)[ch] = run_var[ch];
        }
    }

    Tensor out(in.shape);
    for (size_t i = 0; i < n; ++i)
        for (size_t ch = 0; ch < c; ++ch) {
            double xhat = (in.v[i * c + ch] - (*mean)[ch]) / std::sqrt((*var)[ch] + eps);
            out.v[i * c + ch] = gam[ch] * xhat + bet[ch];
        }

    bool train_stats = g.training;
    return g.make(std::move(out), [&g, x, gamma, beta, mean, var, n, c, eps, train_stats](Var y) {
        const Tensor& gy = g.grad(y);
        const Tensor& in = g.val(x);
        const Tensor& gam = g.val(gamma);
        Tensor& gx = g.grad(x);
        Tensor& ggam = g.grad(gamma);
        Tensor& gbet = g.grad(beta);
        for (size_t ch = 0; ch < c; ++ch) {
            double mu = (*mean)[ch], istd = 1.0 / std::sqrt((*var)[ch] + eps);
            double sum_dy = 0, sum_dy_xhat = 0;
            for (size_t i = 0; i < n; ++i) {
                double dy = gy.v[i * c + ch];
                double xhat = (in.v[i * c + ch] - mu) * istd;
                sum_dy += dy;
                sum_dy_xhat += dy * xhat;
            }
            ggam[ch] += sum_dy_xhat;
            gbet[ch] += sum_dy;
            if (train_stats) {
                // batch statistics depend on x
                for (size_t i = 0; i < n; ++i) {
                    double dy = gy.v[i * c + ch];
                    double xhat = (in.v[i * c + ch] - mu) * istd;
                    gx.v[i * c + ch] += gam[ch] * istd * (dy - sum_dy / n - xhat * sum_dy_xhat / n);
                }
            } else {
                for (size_t i = 0; i < n; ++i) gx.v[i * c + ch] += gam[ch] * istd * gy.v[i * c + ch];
            }
        }
    });
}

}  // namespace inkline
