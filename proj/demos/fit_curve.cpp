// Fit a tiny MLP to y = sin(3x) with the reverse-mode tape and Adam.
// Prints the loss as it falls, then a sampled prediction table.

#include <cmath>
#include <cstdio>
#include <vector>

#include "inkline/inkline.hpp"

using namespace inkline;

int main() {
    const size_t n = 64;
    Tensor xs({n, 1}), ys({n, 1});
    for (size_t i = 0; i < n; ++i) {
        double x = -1.0 + 2.0 * double(i) / double(n - 1);
        xs[i] = x;
        ys[i] = std::sin(3.0 * x);
    }

    Parameter W1("fit.W1", {1, 16}), b1("fit.b1", {16});
    Parameter W2("fit.W2", {16, 16}), b2("fit.b2", {16});
    Parameter W3("fit.W3", {16, 1}), b3("fit.b3", {1});
    std::vector<Parameter*> params{&W1, &b1, &W2, &b2, &W3, &b3};

    Rng rng(7);
    glorot_init(params, rng);
    OptimizerConfig oc;
    oc.lr = 0.01;
    Optimizer opt(params, oc);

    auto predict = [&](Graph& g) {
        Var h = g.tanh_(g.add_rowvec(g.dense(g.input(xs), g.use(W1)), g.use(b1)));
        h = g.tanh_(g.add_rowvec(g.dense(h, g.use(W2)), g.use(b2)));
        return g.add_rowvec(g.dense(h, g.use(W3)), g.use(b3));
    };

    for (size_t epoch = 0; epoch < 2000; ++epoch) {
        Graph g;
        Var loss = g.scale(g.sumsq(g.sub(predict(g), g.input(ys))), 1.0 / n);
        for (Parameter* p : params) p->zero_grad();
        g.backward(loss);
        opt.step(oc.lr);
        if (epoch % 400 == 0 || epoch == 1999)
            std::printf("epoch %4zu  mse %.6f\n", epoch, g.val(loss)[0]);
    }

    Graph g;
    const Tensor& fit = g.val(predict(g));
    std::printf("\n%8s %10s %10s\n", "x", "sin(3x)", "fit");
    for (size_t i = 0; i < n; i += 9)
        std::printf("%8.3f %10.4f %10.4f\n", xs[i], ys[i], fit[i]);
    return 0;
}
