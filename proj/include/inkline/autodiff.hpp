#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_map>

#include "inkline/rng.hpp"
#include "inkline/tensor.hpp"

namespace inkline {

struct Var {
    int id = -1;
};

// Eager reverse-mode tape. Each op computes its value on construction and
// records a closure that scatters the node's gradient to its inputs. Nodes
// are created in topological order, so backward() is a reverse sweep.
//
// A Graph is built per sample and must not be moved while alive (closures
// capture `this`).
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool training = false;  // dropout/batchnorm mode
    Rng* rng = nullptr;     // consumed by dropout in training mode

    Var input(Tensor t) {
        nodes_.push_back({std::move(t), {}, nullptr, {}});
        return {static_cast<int>(nodes_.size() - 1)};
    }

    // Leaf view of a trainable parameter; memoized so repeated use shares one
    // node and gradients accumulate naturally.
    Var use(Parameter& p) {
        auto it = leaves_.find(&p);
        if (it != leaves_.end()) return {it->second};
        nodes_.push_back({Tensor(), {}, &p, {}});
        int id = static_cast<int>(nodes_.size() - 1);
        leaves_[&p] = id;
        return {id};
    }

    const Tensor& val(Var x) const {
        const Node& n = nodes_[x.id];
        return n.param ? n.param->value : n.value;
    }

    // Gradient buffer, allocated zeroed on first touch.
    Tensor& grad(Var x) {
        Node& n = nodes_[x.id];
        if (n.grad.shape != val(x).shape || n.grad.size() != val(x).size()) n.grad = Tensor(val(x).shape);
        return n.grad;
    }

    size_t size() const { return nodes_.size(); }

    // Accumulates dLoss/dParameter into every reachable Parameter's grad.
    // Calling twice without zeroing parameter grads doubles them.
    void backward(Var loss) {
        if (val(loss).size() != 1) throw std::invalid_argument("backward: loss must be scalar");
        for (Node& n : nodes_) n.grad.fill(0.0);
        grad(loss)[0] = 1.0;
        for (int id = loss.id; id >= 0; --id) {
            Node& n = nodes_[id];
            if (n.grad.size() == 0 || n.grad.shape != val({id}).shape) continue;  // untouched
            if (n.back) n.back();
            if (n.param) {
                for (size_t i = 0; i < n.grad.size(); ++i) n.param->grad[i] += n.grad[i];
            }
        }
    }

    // ---- elementwise ----

    Var add(Var a, Var b) {
        const Tensor &ta = val(a), &tb = val(b);
        if (!ta.same_shape(tb)) throw std::invalid_argument("add: shape mismatch");
        Tensor out = ta;
        for (size_t i = 0; i < out.size(); ++i) out[i] += tb[i];
        return make(std::move(out), [this, a, b](Var y) {
            const Tensor& g = grad(y);
            Tensor &ga = grad(a), &gb = grad(b);
            for (size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
                gb[i] += g[i];
            }
        });
    }

    Var sub(Var a, Var b) {
        const Tensor &ta = val(a), &tb = val(b);
        if (!ta.same_shape(tb)) throw std::invalid_argument("sub: shape mismatch");
        Tensor out = ta;
        for (size_t i = 0; i < out.size(); ++i) out[i] -= tb[i];
        return make(std::move(out), [this, a, b](Var y) {
            const Tensor& g = grad(y);
            Tensor &ga = grad(a), &gb = grad(b);
            for (size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
                gb[i] -= g[i];
            }
        });
    }

    Var mul(Var a, Var b) {
        const Tensor &ta = val(a), &tb = val(b);
        if (!ta.same_shape(tb)) throw std::invalid_argument("mul: shape mismatch");
        Tensor out = ta;
        for (size_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
        return make(std::move(out), [this, a, b](Var y) {
            const Tensor& g = grad(y);
            const Tensor &ta = val(a), &tb = val(b);
            Tensor &ga = grad(a), &gb = grad(b);
            for (size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i] * tb[i];
                gb[i] += g[i] * ta[i];
            }
        });
    }

    Var scale(Var a, double c) {
        Tensor out = val(a);
        for (double& x : out.v) x *= c;
        return make(std::move(out), [this, a, c](Var y) {
            const Tensor& g = grad(y);
            Tensor& ga = grad(a);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
        });
    }

    Var add_const(Var a, double c) {
        Tensor out = val(a);
        for (double& x : out.v) x += c;
        return make(std::move(out), [this, a](Var y) {
            const Tensor& g = grad(y);
            Tensor& ga = grad(a);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
    }

    Var relu(Var a) {
        Tensor out = val(a);
        for (double& x : out.v) x = x > 0 ? x : 0;
        return make(std::move(out), [this, a](Var y) {
            const Tensor& g = grad(y);
            const Tensor& ta = val(a);
            Tensor& ga = grad(a);
            for (size_t i = 0; i < g.size(); ++i)
                if (ta[i] > 0) ga[i] += g[i];
        });
    }

    Var sigmoid(Var a) {
        Tensor out = val(a);
        for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
        return make(std::move(out), [this, a](Var y) {
            const Tensor &g = grad(y), &s = val(y);
            Tensor& ga = grad(a);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s[i] * (1 - s[i]);
        });
    }

    Var tanh_(Var a) {
        Tensor out = val(a);
        for (double& x : out.v) x = std::tanh(x);
        return make(std::move(out), [this, a](Var y) {
            const Tensor &g = grad(y), &t = val(y);
            Tensor& ga = grad(a);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1 - t[i] * t[i]);
        });
    }

    // ---- shape ----

    Var reshape(Var a, std::vector<size_t> shape) {
        if (numel(shape) != val(a).size()) throw std::invalid_argument("reshape: element count mismatch");
        Tensor out = val(a);
        out.shape = std::move(shape);
        return make(std::move(out), [this, a](Var y) {
            const Tensor& g = grad(y);
            Tensor& ga = grad(a);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
    }

    Var flatten(Var a) { return reshape(a, {val(a).size()}); }

    Var concat(const std::vector<Var>& xs) {
        size_t total = 0;
        for (Var x : xs) total += val(x).size();
        Tensor out({total});
        size_t off = 0;
        for (Var x : xs) {
            const Tensor& t = val(x);
            std::copy(t.v.begin(), t.v.end(), out.v.begin() + off);
            off += t.size();
        }
        auto parts = xs;
        return make(std::move(out), [this, parts](Var y) {
            const Tensor& g = grad(y);
            size_t off = 0;
            for (Var x : parts) {
                Tensor& gx = grad(x);
                for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[off + i];
                off += gx.size();
            }
        });
    }

    Var slice(Var a, size_t off, size_t len) {
        const Tensor& t = val(a);
        if (off + len > t.size()) throw std::invalid_argument("slice: out of range");
        Tensor out({len});
        std::copy(t.v.begin() + off, t.v.begin() + off + len, out.v.begin());
        return make(std::move(out), [this, a, off, len](Var y) {
            const Tensor& g = grad(y);
            Tensor& ga = grad(a);
            for (size_t i = 0; i < len; ++i) ga[off + i] += g[i];
        });
    }

    // sequence of [n] vectors -> [T,n]
    Var stack_rows(const std::vector<Var>& rows) {
        if (rows.empty()) throw std::invalid_argument("stack_rows: empty");
        size_t n = val(rows[0]).size();
        Tensor out({rows.size(), n});
        for (size_t r = 0; r < rows.size(); ++r) {
            const Tensor& t = val(rows[r]);
            if (t.size() != n) throw std::invalid_argument("stack_rows: ragged rows");
            std::copy(t.v.begin(), t.v.end(), out.v.begin() + r * n);
        }
        auto parts = rows;
        return make(std::move(out), [this, parts, n](Var y) {
            const Tensor& g = grad(y);
            for (size_t r = 0; r < parts.size(); ++r) {
                Tensor& gr = grad(parts[r]);
                for (size_t i = 0; i < n; ++i) gr[i] += g[r * n + i];
            }
        });
    }

    // ---- linear algebra ----

    Var matmul(Var a, Var b) {
        const Tensor &A = val(a), &B = val(b);
        if (A.shape.size() != 2 || B.shape.size() != 2 || A.shape[1] != B.shape[0])
            throw std::invalid_argument("matmul: shapes " + shape_str(A.shape) + " x " + shape_str(B.shape));
        size_t m = A.shape[0], k = A.shape[1], n = B.shape[1];
        Tensor out({m, n});
        for (size_t i = 0; i < m; ++i) {
            const double* arow = &A.v[i * k];
            double* orow = &out.v[i * n];
            for (size_t p = 0; p < k; ++p) {
                double av = arow[p];
                if (av == 0.0) continue;
                const double* brow = &B.v[p * n];
                for (size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
        }
        return make(std::move(out), [this, a, b, m, k, n](Var y) {
            const Tensor& g = grad(y);
            const Tensor &A = val(a), &B = val(b);
            Tensor &ga = grad(a), &gb = grad(b);
            // dA = g·Bᵀ ; dB = Aᵀ·g
            for (size_t i = 0; i < m; ++i) {
                const double* grow = &g.v[i * n];
                double* garow = &ga.v[i * k];
                for (size_t p = 0; p < k; ++p) {
                    const double* brow = &B.v[p * n];
                    double acc = 0;
                    for (size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    garow[p] += acc;
                }
                const double* arow = &A.v[i * k];
                for (size_t p = 0; p < k; ++p) {
                    double av = arow[p];
                    if (av == 0.0) continue;
                    double* gbrow = &gb.v[p * n];
                    for (size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                }
            }
        });
    }

    // v[n] · W[n,m] (+ bias[m]) -> [m]; the affine map for row vectors
    Var dense(Var x, Var W, Var bias = {-1}) {
        const Tensor &tx = val(x), &tW = val(W);
        if (tW.shape.size() != 2 || tx.size() != tW.shape[0])
            throw std::invalid_argument("dense: shapes " + shape_str(tx.shape) + " x " + shape_str(tW.shape));
        size_t n = tW.shape[0], m = tW.shape[1];
        Tensor out({m});
        if (bias.id >= 0) {
            const Tensor& tb = val(bias);
            if (tb.size() != m) throw std::invalid_argument("dense: bias size mismatch");
            std::copy(tb.v.begin(), tb.v.end(), out.v.begin());
        }
        for (size_t i = 0; i < n; ++i) {
            double xv = tx[i];
            if (xv == 0.0) continue;
            const double* wrow = &tW.v[i * m];
            for (size_t j = 0; j < m; ++j) out[j] += xv * wrow[j];
        }
        return make(std::move(out), [this, x, W, bias, n, m](Var y) {
            const Tensor& g = grad(y);
            const Tensor &tx = val(x), &tW = val(W);
            Tensor &gx = grad(x), &gW = grad(W);
            for (size_t i = 0; i < n; ++i) {
                const double* wrow = &tW.v[i * m];
                double* gwrow = &gW.v[i * m];
                double acc = 0, xv = tx[i];
                for (size_t j = 0; j < m; ++j) {
                    acc += g[j] * wrow[j];
                    gwrow[j] += xv * g[j];
                }
                gx[i] += acc;
            }
            if (bias.id >= 0) {
                Tensor& gb = grad(bias);
                for (size_t j = 0; j < m; ++j) gb[j] += g[j];
            }
        });
    }

    // M[r,c] + broadcast row v[c]
    Var add_rowvec(Var M, Var v) {
        const Tensor &tm = val(M), &tv = val(v);
        if (tm.shape.size() != 2 || tv.size() != tm.shape[1]) throw std::invalid_argument("add_rowvec: shape mismatch");
        size_t r = tm.shape[0], c = tm.shape[1];
        Tensor out = tm;
        for (size_t i = 0; i < r; ++i)
            for (size_t j = 0; j < c; ++j) out.v[i * c + j] += tv[j];
        return make(std::move(out), [this, M, v, r, c](Var y) {
            const Tensor& g = grad(y);
            Tensor &gm = grad(M), &gv = grad(v);
            for (size_t i = 0; i < r; ++i)
                for (size_t j = 0; j < c; ++j) {
                    gm.v[i * c + j] += g.v[i * c + j];
                    gv[j] += g.v[i * c + j];
                }
        });
    }

    // ---- reductions / probability ----

    Var sum(Var a) {
        double s = 0;
        for (double x : val(a).v) s += x;
        return make(Tensor::scalar(s), [this, a](Var y) {
            double g = grad(y)[0];
            Tensor& ga = grad(a);
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        });
    }

    Var sumsq(Var a) {
        double s = 0;
        for (double x : val(a).v) s += x * x;
        return make(Tensor::scalar(s), [this, a](Var y) {
            double g = grad(y)[0];
            const Tensor& ta = val(a);
            Tensor& ga = grad(a);
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * g * ta[i];
        });
    }

    // stable softmax over a vector; outputs sum to 1 within 1e-12
    Var softmax(Var a) {
        Tensor out = val(a);
        double mx = out[0];
        for (double x : out.v) mx = std::max(mx, x);
        double sum = 0;
        for (double& x : out.v) {
            x = std::exp(x - mx);
            sum += x;
        }
        for (double& x : out.v) x /= sum;
        return make(std::move(out), [this, a](Var y) {
            const Tensor &g = grad(y), &s = val(y);
            Tensor& ga = grad(a);
            double dot = 0;
            for (size_t i = 0; i < g.size(); ++i) dot += g[i] * s[i];
            for (size_t i = 0; i < g.size(); ++i) ga[i] += s[i] * (g[i] - dot);
        });
    }

    Var dropout(Var a, double rate) {
        if (rate < 0 || rate >= 1) throw std::invalid_argument("dropout: rate must be in [0,1)");
        if (!training || rate == 0.0) {
            // eval mode (and rate 0) is the identity
            Tensor out = val(a);
            return make(std::move(out), [this, a](Var y) {
                const Tensor& g = grad(y);
                Tensor& ga = grad(a);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            });
        }
        if (!rng) throw std::logic_error("dropout: training graph needs an rng");
        Tensor out = val(a);
        auto mask = std::make_shared<std::vector<char>>(out.size());
        double keep = 1.0 - rate;
        for (size_t i = 0; i < out.size(); ++i) {
            bool drop = rng->bernoulli(rate);
            (*mask)[i] = !drop;
            out[i] = drop ? 0.0 : out[i] / keep;
        }
        return make(std::move(out), [this, a, mask, keep](Var y) {
            const Tensor& g = grad(y);
            Tensor& ga = grad(a);
            for (size_t i = 0; i < g.size(); ++i)
                if ((*mask)[i]) ga[i] += g[i] / keep;
        });
    }

    // loss = Σ_t w_t·(−log softmax(logits_t)[target_t]) / Σ_t w_t
    Var weighted_sequence_cross_entropy(Var logits, const std::vector<int>& targets, const std::vector<double>& weights) {
        const Tensor& L = val(logits);
        if (L.shape.size() != 2) throw std::invalid_argument("sequence_ce: logits must be [T,V]");
        size_t T = L.shape[0], V = L.shape[1];
        if (targets.size() != T || weights.size() != T) throw std::invalid_argument("sequence_ce: length mismatch");
        double wsum = 0;
        for (double w : weights) wsum += w;
        if (wsum <= 0) throw std::invalid_argument("sequence_ce: zero total weight");

        auto probs = std::make_shared<Tensor>(std::vector<size_t>{T, V});
        double loss = 0;
        for (size_t t = 0; t < T; ++t) {
            int tgt = targets[t];
            if (tgt < 0 || static_cast<size_t>(tgt) >= V) throw std::invalid_argument("sequence_ce: target out of range");
            const double* row = &L.v[t * V];
            double mx = row[0];
            for (size_t j = 0; j < V; ++j) mx = std::max(mx, row[j]);
            double sum = 0;
            double* prow = &probs->v[t * V];
            for (size_t j = 0; j < V; ++j) {
                prow[j] = std::exp(row[j] - mx);
                sum += prow[j];
            }
            for (size_t j = 0; j < V; ++j) prow[j] /= sum;
            loss -= weights[t] * std::log(prow[tgt]);
        }
        loss /= wsum;
        auto tg = targets;
        auto wt = weights;
        return make(Tensor::scalar(loss), [this, logits, probs, tg, wt, wsum, T, V](Var y) {
            double g = grad(y)[0];
            Tensor& gl = grad(logits);
            for (size_t t = 0; t < T; ++t) {
                double c = g * wt[t] / wsum;
                const double* prow = &probs->v[t * V];
                double* grow = &gl.v[t * V];
                for (size_t j = 0; j < V; ++j) grow[j] += c * prow[j];
                grow[tg[t]] -= c;
            }
        });
    }

    // internal: register a computed node
    Var make(Tensor value, std::function<void(Var)> back) {
        nodes_.push_back({std::move(value), {}, nullptr, {}});
        int id = static_cast<int>(nodes_.size() - 1);
        nodes_[id].back = [this, id, back = std::move(back)]() { back({id}); };
        return {id};
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        Parameter* param = nullptr;
        std::function<void()> back;
    };
    std::vector<Node> nodes_;
    std::unordered_map<Parameter*, int> leaves_;
};

}  // namespace inkline
