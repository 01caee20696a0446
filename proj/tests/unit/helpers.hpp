#pragma once

#include <filesystem>
#include <string>

#include <inkline/autodiff.hpp>
#include <inkline/rng.hpp>

// Scratch directory under the test working dir, removed on scope exit.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path = std::filesystem::path("tmp_" + tag + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str(const std::string& rel = "") const {
        return rel.empty() ? path.string() : (path / rel).string();
    }
};

// Central finite differences against the analytic gradient of a scalar loss.
// Builds the graph twice per probe, so the builder must be deterministic.
struct GradCheck {
    double eps = 1e-5;
    double tol = 1e-4;

    // returns max relative error over every parameter element
    template <typename BuildLoss>
    double max_rel_error(std::vector<inkline::Parameter*> params, BuildLoss&& build) {
        using namespace inkline;
        {
            Graph g;
            Var loss = build(g);
            for (Parameter* p : params) p->zero_grad();
            g.backward(loss);
        }
        std::vector<Tensor> analytic;
        for (Parameter* p : params) analytic.push_back(p->grad);

        double worst = 0;
        for (size_t pi = 0; pi < params.size(); ++pi) {
            Parameter* p = params[pi];
            for (size_t j = 0; j < p->value.size(); ++j) {
                double keep = p->value[j];
                p->value[j] = keep + eps;
                double up;
                {
                    Graph g;
                    up = g.val(build(g))[0];
                }
                p->value[j] = keep - eps;
                double dn;
                {
                    Graph g;
                    dn = g.val(build(g))[0];
                }
                p->value[j] = keep;
                double fd = (up - dn) / (2 * eps);
                double an = analytic[pi][j];
                double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
                worst = std::max(worst, std::fabs(fd - an) / denom);
            }
        }
        return worst;
    }
};

inline void fill_random(inkline::Parameter& p, inkline::Rng& rng, double scale = 0.5) {
    for (double& v : p.value.v) v = rng.uniform(-scale, scale);
}
