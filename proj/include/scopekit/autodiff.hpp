#pragma once

// Reverse-mode autodiff over dense matrices. A Tape owns the nodes of one
// forward computation; ops record a closure that scatters upstream gradient
// into their inputs. Matrix-level granularity keeps the node count per
// transformer forward in the low hundreds, so closure overhead is noise
// next to the matmuls.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <vector>

#include "scopekit/core.hpp"

namespace scopekit::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tape;

struct Var {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
    inline const Mat& value() const;
    inline double scalar() const;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = delete;
    Tape& operator=(Tape&&) = delete;

    // ---- leaves ----

    Var constant(Mat v) {
        nodes_.push_back(Node{});
        Node& n = nodes_.back();
        n.owned = std::move(v);
        return handle(static_cast<int>(nodes_.size()) - 1);
    }

    // Wraps external storage without copying. The pointee must outlive the tape.
    Var constant_ref(const Mat* v) {
        nodes_.push_back(Node{});
        nodes_.back().ref = v;
        return handle(static_cast<int>(nodes_.size()) - 1);
    }

    // Trainable leaf: after backward(), the node's gradient is accumulated
    // into *grad_sink (which must match value's shape).
    Var param(const Mat* value, Mat* grad_sink) {
        nodes_.push_back(Node{});
        Node& n = nodes_.back();
        n.ref = value;
        n.needs_grad = true;
        n.param_sink = grad_sink;
        return handle(static_cast<int>(nodes_.size()) - 1);
    }

    // ---- matrix ops ----

    Var matmul(Var a, Var b) {
        const Mat& A = val(a.id);
        const Mat& B = val(b.id);
        Mat out(A.rows(), B.cols());
        out.noalias() = A * B;
        return emit(std::move(out), {a.id, b.id}, [this, a = a.id, b = b.id](const Mat& g) {
            if (needs(a)) grad(a).noalias() += g * val(b).transpose();
            if (needs(b)) grad(b).noalias() += val(a).transpose() * g;
        });
    }

    // C = A * B^T
    Var matmul_nt(Var a, Var b) {
        const Mat& A = val(a.id);
        const Mat& B = val(b.id);
        Mat out(A.rows(), B.rows());
        out.noalias() = A * B.transpose();
        return emit(std::move(out), {a.id, b.id}, [this, a = a.id, b = b.id](const Mat& g) {
            if (needs(a)) grad(a).noalias() += g * val(b);
            if (needs(b)) grad(b).noalias() += g.transpose() * val(a);
        });
    }

    Var add(Var a, Var b) {
        Mat out = val(a.id) + val(b.id);
        return emit(std::move(out), {a.id, b.id}, [this, a = a.id, b = b.id](const Mat& g) {
            if (needs(a)) grad(a) += g;
            if (needs(b)) grad(b) += g;
        });
    }

    Var sub(Var a, Var b) {
        Mat out = val(a.id) - val(b.id);
        return emit(std::move(out), {a.id, b.id}, [this, a = a.id, b = b.id](const Mat& g) {
            if (needs(a)) grad(a) += g;
            if (needs(b)) grad(b) -= g;
        });
    }

    Var scale(Var a, double s) {
        Mat out = val(a.id) * s;
        return emit(std::move(out), {a.id}, [this, a = a.id, s](const Mat& g) {
            if (needs(a)) grad(a) += g * s;
        });
    }

    // Broadcast add of a 1 x cols bias vector to every row.
    Var add_rowvec(Var a, Var bias) {
        Mat out = val(a.id).array().rowwise() + val(bias.id).row(0).array();
        return emit(std::move(out), {a.id, bias.id}, [this, a = a.id, b = bias.id](const Mat& g) {
            if (needs(a)) grad(a) += g;
            if (needs(b)) grad(b).row(0) += g.colwise().sum();
        });
    }

    // Broadcast multiply of every row by a 1 x cols gain vector.
    Var row_gain(Var a, Var gain) {
        const Mat& A = val(a.id);
        const Mat& G = val(gain.id);
        Mat out = A.array().rowwise() * G.row(0).array();
        return emit(std::move(out), {a.id, gain.id}, [this, a = a.id, gv = gain.id](const Mat& g) {
            if (needs(a)) grad(a).array() += g.array().rowwise() * val(gv).row(0).array();
            if (needs(gv)) grad(gv).row(0) += (g.array() * val(a).array()).colwise().sum().matrix();
        });
    }

    // y_i = x_i / sqrt(mean(x_i^2) + eps), per row.
    Var rmsnorm(Var a, double eps = 1e-5) {
        const Mat& A = val(a.id);
        Mat out(A.rows(), A.cols());
        double d = static_cast<double>(A.cols());
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            double ms = A.row(i).squaredNorm() / d;
            out.row(i) = A.row(i) / std::sqrt(ms + eps);
        }
        return emit(std::move(out), {a.id}, [this, a = a.id, eps](const Mat& g) {
            if (!needs(a)) return;
            const Mat& A = val(a);
            Mat& da = grad(a);
            double d = static_cast<double>(A.cols());
            for (Eigen::Index i = 0; i < A.rows(); ++i) {
                double ms = A.row(i).squaredNorm() / d;
                double r = 1.0 / std::sqrt(ms + eps);
                double gx = g.row(i).dot(A.row(i));
                da.row(i) += r * g.row(i) - (r * r * r / d) * gx * A.row(i);
            }
        });
    }

    // tanh-approximate GELU; smooth everywhere (keeps finite-difference
    // gradient checks clean).
    Var gelu(Var a) {
        const Mat& A = val(a.id);
        auto x = A.array();
        Mat out = (0.5 * x * (1.0 + (kGeluC * (x + 0.044715 * x.cube())).tanh())).matrix();
        return emit(std::move(out), {a.id}, [this, a = a.id](const Mat& g) {
            if (!needs(a)) return;
            auto x = val(a).array();
            auto t = (kGeluC * (x + 0.044715 * x.cube())).tanh();
            grad(a).array() +=
                g.array() *
                (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t.square()) * kGeluC * (1.0 + 3.0 * 0.044715 * x.square()));
        });
    }

    Var relu(Var a) {
        Mat out = val(a.id).cwiseMax(0.0);
        return emit(std::move(out), {a.id}, [this, a = a.id](const Mat& g) {
            if (!needs(a)) return;
            grad(a).array() += g.array() * (val(a).array() > 0.0).cast<double>();
        });
    }

    Var cols(Var a, int c0, int n) {
        Mat out = val(a.id).middleCols(c0, n);
        return emit(std::move(out), {a.id}, [this, a = a.id, c0, n](const Mat& g) {
            if (needs(a)) grad(a).middleCols(c0, n) += g;
        });
    }

    Var hconcat(const std::vector<Var>& parts) {
        Eigen::Index rows = val(parts.front().id).rows(), c = 0;
        for (const Var& p : parts) c += val(p.id).cols();
        Mat out(rows, c);
        std::vector<int> ids;
        c = 0;
        for (const Var& p : parts) {
            out.middleCols(c, val(p.id).cols()) = val(p.id);
            c += val(p.id).cols();
            ids.push_back(p.id);
        }
        return emit(std::move(out), ids, [this, ids](const Mat& g) {
            Eigen::Index c = 0;
            for (int id : ids) {
                Eigen::Index w = val(id).cols();
                if (needs(id)) grad(id) += g.middleCols(c, w);
                c += w;
            }
        });
    }

    Var vconcat(const std::vector<Var>& parts) {
        Eigen::Index cols = val(parts.front().id).cols(), r = 0;
        for (const Var& p : parts) r += val(p.id).rows();
        Mat out(r, cols);
        std::vector<int> ids;
        r = 0;
        for (const Var& p : parts) {
            out.middleRows(r, val(p.id).rows()) = val(p.id);
            r += val(p.id).rows();
            ids.push_back(p.id);
        }
        return emit(std::move(out), ids, [this, ids](const Mat& g) {
            Eigen::Index r = 0;
            for (int id : ids) {
                Eigen::Index h = val(id).rows();
                if (needs(id)) grad(id) += g.middleRows(r, h);
                r += h;
            }
        });
    }

    Var gather_rows(Var a, std::vector<int> rows) {
        const Mat& A = val(a.id);
        Mat out(static_cast<Eigen::Index>(rows.size()), A.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = A.row(rows[i]);
        return emit(std::move(out), {a.id}, [this, a = a.id, rows = std::move(rows)](const Mat& g) {
            if (!needs(a)) return;
            for (std::size_t i = 0; i < rows.size(); ++i)
                grad(a).row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
        });
    }

    // Row i is softmaxed over columns [0, i]; later columns are exactly zero,
    // so position i never sees tokens after it.
    Var causal_softmax(Var a) {
        const Mat& A = val(a.id);
        Mat out = Mat::Zero(A.rows(), A.cols());
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            Eigen::Index w = std::min<Eigen::Index>(i + 1, A.cols());
            Eigen::Map<const Eigen::ArrayXd> src(A.data() + i * A.cols(), w);
            Eigen::Map<Eigen::ArrayXd> dst(out.data() + i * out.cols(), w);
            dst = (src - src.maxCoeff()).exp();
            dst *= 1.0 / dst.sum();
        }
        return emit(std::move(out), {a.id}, [this, a = a.id, out_id = next_id()](const Mat& g) {
            if (!needs(a)) return;
            const Mat& P = val(out_id);
            Mat& da = grad(a);
            for (Eigen::Index i = 0; i < P.rows(); ++i) {
                Eigen::Index w = std::min<Eigen::Index>(i + 1, P.cols());
                const double* p = P.data() + i * P.cols();
                const double* gp = g.data() + i * g.cols();
                double* dst = da.data() + i * da.cols();
                double dot = 0.0;
                for (Eigen::Index j = 0; j < w; ++j) dot += gp[j] * p[j];
                for (Eigen::Index j = 0; j < w; ++j) dst[j] += p[j] * (gp[j] - dot);
            }
        });
    }

    // Inverted dropout on the whole matrix; the mask is drawn once at
    // forward time and reused on the backward pass.
    Var dropout(Var a, double p, Rng& rng) {
        if (p <= 0.0) return a;
        const Mat& A = val(a.id);
        Mat mask(A.rows(), A.cols());
        double keep = 1.0 - p;
        for (Eigen::Index i = 0; i < A.rows(); ++i)
            for (Eigen::Index j = 0; j < A.cols(); ++j)
                mask(i, j) = rng.next_unit() < keep ? 1.0 / keep : 0.0;
        Mat out = A.cwiseProduct(mask);
        return emit(std::move(out), {a.id}, [this, a = a.id, mask = std::move(mask)](const Mat& g) {
            if (needs(a)) grad(a) += g.cwiseProduct(mask);
        });
    }

    // ---- loss heads (all return 1x1) ----

    // Mean cross-entropy over rows where mask[i] != 0; targets[i] indexes the
    // vocabulary column.
    Var cross_entropy_masked(Var logits, std::vector<int> targets, std::vector<int> mask) {
        const Mat& L = val(logits.id);
        double total = 0.0;
        int count = 0;
        for (Eigen::Index i = 0; i < L.rows(); ++i) {
            if (!mask[static_cast<std::size_t>(i)]) continue;
            total += row_logsumexp(L.row(i)) - L(i, targets[static_cast<std::size_t>(i)]);
            ++count;
        }
        if (count == 0) throw DomainError("cross_entropy_masked: empty target mask");
        Mat out(1, 1);
        out(0, 0) = total / count;
        return emit(std::move(out), {logits.id},
                    [this, l = logits.id, targets = std::move(targets), mask = std::move(mask), count](const Mat& g) {
                        if (!needs(l)) return;
                        const Mat& L = val(l);
                        Mat& dl = grad(l);
                        double s = g(0, 0) / count;
                        for (Eigen::Index i = 0; i < L.rows(); ++i) {
                            if (!mask[static_cast<std::size_t>(i)]) continue;
                            Eigen::RowVectorXd p = row_softmax(L.row(i));
                            dl.row(i) += s * p;
                            dl(i, targets[static_cast<std::size_t>(i)]) -= s;
                        }
                    });
    }

    // Sum of log p(target_i | context) over rows where mask[i] != 0.
    Var sequence_logprob(Var logits, std::vector<int> targets, std::vector<int> mask) {
        const Mat& L = val(logits.id);
        double total = 0.0;
        for (Eigen::Index i = 0; i < L.rows(); ++i) {
            if (!mask[static_cast<std::size_t>(i)]) continue;
            total += L(i, targets[static_cast<std::size_t>(i)]) - row_logsumexp(L.row(i));
        }
        Mat out(1, 1);
        out(0, 0) = total;
        return emit(std::move(out), {logits.id},
                    [this, l = logits.id, targets = std::move(targets), mask = std::move(mask)](const Mat& g) {
                        if (!needs(l)) return;
                        const Mat& L = val(l);
                        Mat& dl = grad(l);
                        double s = g(0, 0);
                        for (Eigen::Index i = 0; i < L.rows(); ++i) {
                            if (!mask[static_cast<std::size_t>(i)]) continue;
                            Eigen::RowVectorXd p = row_softmax(L.row(i));
                            dl.row(i) -= s * p;
                            dl(i, targets[static_cast<std::size_t>(i)]) += s;
                        }
                    });
    }

    // Mean over rows of ||a_i - b_i||^2 against a fixed reference.
    Var mse_rows_const(Var a, Mat b) {
        const Mat& A = val(a.id);
        if (A.rows() != b.rows() || A.cols() != b.cols())
            throw DomainError("mse_rows_const: shape mismatch");
        double n = static_cast<double>(A.rows());
        Mat out(1, 1);
        out(0, 0) = (A - b).squaredNorm() / n;
        return emit(std::move(out), {a.id}, [this, a = a.id, b = std::move(b), n](const Mat& g) {
            if (needs(a)) grad(a) += (2.0 * g(0, 0) / n) * (val(a) - b);
        });
    }

    // Mean over rows of max(0, cos(a_i, b_i)) against a fixed reference.
    // Rows where either side has (near-)zero norm are excluded and counted.
    Var relu_cos_rows_const(Var a, Mat b, int* skipped = nullptr) {
        const Mat& A = val(a.id);
        if (A.rows() != b.rows() || A.cols() != b.cols())
            throw DomainError("relu_cos_rows_const: shape mismatch");
        constexpr double kTiny = 1e-30;
        double total = 0.0;
        int valid = 0, skip = 0;
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            double na = A.row(i).norm(), nb = b.row(i).norm();
            if (na < kTiny || nb < kTiny) {
                ++skip;
                continue;
            }
            total += std::max(0.0, A.row(i).dot(b.row(i)) / (na * nb));
            ++valid;
        }
        if (skipped) *skipped = skip;
        if (valid == 0) throw DomainError("relu_cos_rows_const: no valid rows");
        Mat out(1, 1);
        out(0, 0) = total / valid;
        return emit(std::move(out), {a.id}, [this, a = a.id, b = std::move(b), valid](const Mat& g) {
            if (!needs(a)) return;
            constexpr double kTiny = 1e-30;
            const Mat& A = val(a);
            Mat& da = grad(a);
            double s = g(0, 0) / valid;
            for (Eigen::Index i = 0; i < A.rows(); ++i) {
                double na = A.row(i).norm(), nb = b.row(i).norm();
                if (na < kTiny || nb < kTiny) continue;
                double c = A.row(i).dot(b.row(i)) / (na * nb);
                if (c <= 0.0) continue;
                da.row(i) += s * (b.row(i) / (na * nb) - (c / (na * na)) * A.row(i));
            }
        });
    }

    // Binary cross-entropy with logits; logits and labels are n x 1.
    Var bce_with_logits(Var logits, std::vector<double> labels) {
        const Mat& L = val(logits.id);
        double total = 0.0;
        for (Eigen::Index i = 0; i < L.rows(); ++i) {
            double z = L(i, 0), y = labels[static_cast<std::size_t>(i)];
            // log(1+e^z) - y*z, computed stably
            total += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y * z;
        }
        double n = static_cast<double>(L.rows());
        Mat out(1, 1);
        out(0, 0) = total / n;
        return emit(std::move(out), {logits.id}, [this, l = logits.id, labels = std::move(labels), n](const Mat& g) {
            if (!needs(l)) return;
            const Mat& L = val(l);
            Mat& dl = grad(l);
            double s = g(0, 0) / n;
            for (Eigen::Index i = 0; i < L.rows(); ++i) {
                double sig = 1.0 / (1.0 + std::exp(-L(i, 0)));
                dl(i, 0) += s * (sig - labels[static_cast<std::size_t>(i)]);
            }
        });
    }

    // ---- scalar (1x1) ops ----

    Var s_add(Var a, Var b) { return add(a, b); }
    Var s_sub(Var a, Var b) { return sub(a, b); }
    Var s_scale(Var a, double s) { return scale(a, s); }

    Var s_log_sigmoid(Var a) {
        double x = val(a.id)(0, 0);
        Mat out(1, 1);
        out(0, 0) = -(std::max(-x, 0.0) + std::log1p(std::exp(-std::abs(x))));  // log sigma(x)
        return emit(std::move(out), {a.id}, [this, a = a.id](const Mat& g) {
            if (!needs(a)) return;
            double x = val(a)(0, 0);
            grad(a)(0, 0) += g(0, 0) / (1.0 + std::exp(x));  // 1 - sigma(x)
        });
    }

    // ---- driver ----

    void backward(Var loss) {
        if (val(loss.id).size() != 1) throw DomainError("backward: loss must be scalar");
        for (Node& n : nodes_) n.grad.setZero(0, 0);
        Node& top = nodes_[static_cast<std::size_t>(loss.id)];
        top.grad = Mat::Ones(1, 1);
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.back && n.needs_grad && n.grad.size() > 0) n.back(n.grad);
        }
        for (Node& n : nodes_) {
            if (n.param_sink && n.grad.size() > 0) *n.param_sink += n.grad;
        }
    }

    void clear() { nodes_.clear(); }
    std::size_t size() const { return nodes_.size(); }

    const Mat& val(int id) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        return n.ref ? *n.ref : n.owned;
    }

private:
    struct Node {
        Mat owned;
        const Mat* ref = nullptr;
        Mat grad;
        Mat* param_sink = nullptr;
        bool needs_grad = false;
        std::function<void(const Mat&)> back;
    };

    static constexpr double kGeluC = 0.7978845608028653558798921198687;  // sqrt(2/pi)

    std::vector<Node> nodes_;

    Var handle(int id) { return Var{this, id}; }
    int next_id() const { return static_cast<int>(nodes_.size()); }

    bool needs(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

    Mat& grad(int id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.size() == 0) n.grad = Mat::Zero(val(id).rows(), val(id).cols());
        return n.grad;
    }

    Var emit(Mat out, const std::vector<int>& inputs, std::function<void(const Mat&)> back) {
        bool ng = false;
        for (int i : inputs) ng = ng || nodes_[static_cast<std::size_t>(i)].needs_grad;
        nodes_.push_back(Node{});
        Node& n = nodes_.back();
        n.owned = std::move(out);
        n.needs_grad = ng;
        if (ng) n.back = std::move(back);
        return handle(static_cast<int>(nodes_.size()) - 1);
    }

    static double row_logsumexp(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
        double m = row.maxCoeff();
        return m + std::log((row.array() - m).exp().sum());
    }

    static Eigen::RowVectorXd row_softmax(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
        double m = row.maxCoeff();
        Eigen::ArrayXd e = (row.array() - m).exp();
        return (e / e.sum()).matrix();
    }
};

inline const Mat& Var::value() const { return tape->val(id); }
inline double Var::scalar() const {
    const Mat& m = tape->val(id);
    if (m.size() != 1) throw DomainError("Var::scalar: not a 1x1 value");
    return m(0, 0);
}

}  // namespace scopekit::ad
