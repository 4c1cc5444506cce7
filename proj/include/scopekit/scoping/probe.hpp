#pragma once

// Representation probe: layer-averaged, per-layer-normalized, concatenated
// hidden states feeding a two-layer MLP with a scalar logit. The language
// model stays frozen; only the MLP trains.

#include <vector>

#include "scopekit/autodiff.hpp"
#include "scopekit/core.hpp"
#include "scopekit/lm/model.hpp"

namespace scopekit::scoping {

struct ProbeFeatures {
    Eigen::RowVectorXd values;  // (n_layers + 1) * d_model
    int zero_norm_layers = 0;
};

// Per layer: drop the first position, average the rest, scale the mean to
// unit L2 norm (a zero mean stays zero and is counted), then concatenate.
inline ProbeFeatures probe_features(const lm::RepresentationTrace& trace) {
    int n_pos = trace.n_positions();
    if (n_pos < 2) throw DomainError("probe_features: trace needs at least 2 positions");
    int d = static_cast<int>(trace.hidden[0].cols());
    ProbeFeatures out;
    out.values.resize(static_cast<Eigen::Index>(trace.hidden.size()) * d);
    for (std::size_t l = 0; l < trace.hidden.size(); ++l) {
        Eigen::RowVectorXd mean = trace.hidden[l].bottomRows(n_pos - 1).colwise().mean();
        double norm = mean.norm();
        if (norm < 1e-30) {
            ++out.zero_norm_layers;
            mean.setZero();
        } else {
            mean /= norm;
        }
        out.values.segment(static_cast<Eigen::Index>(l) * d, d) = mean;
    }
    return out;
}

struct ProbeModel {
    static constexpr int kHidden = 256;
    ad::Mat w1;  // in x 256
    ad::Mat b1;  // 1 x 256
    ad::Mat w2;  // 256 x 1
    ad::Mat b2;  // 1 x 1

    // Initialization is matched to the tuned learning-rate regime (1e-5,
    // a few hundred Adam steps): the output head starts at zero so initial
    // logits are exactly 0, and the hidden weights start small enough that
    // the learned movement dominates the random init instead of freezing
    // the first layer into fixed random features.
    static ProbeModel init(int input_dim, std::uint64_t seed) {
        ProbeModel p;
        Rng rng(mix_seed(seed, "probe-init"));
        p.w1 = ad::Mat(input_dim, kHidden);
        double std = 1e-3;
        for (Eigen::Index i = 0; i < p.w1.rows(); ++i)
            for (Eigen::Index j = 0; j < p.w1.cols(); ++j) p.w1(i, j) = std * rng.next_normal();
        p.b1 = ad::Mat::Zero(1, kHidden);
        p.w2 = ad::Mat::Zero(kHidden, 1);
        p.b2 = ad::Mat::Zero(1, 1);
        return p;
    }

    int input_dim() const { return static_cast<int>(w1.rows()); }

    // Batch of feature rows -> logits (n x 1).
    Eigen::VectorXd logits(const ad::Mat& features) const {
        ad::Mat h = ((features * w1).array().rowwise() + b1.row(0).array()).cwiseMax(0.0);
        return (h * w2).col(0) + Eigen::VectorXd::Constant(features.rows(), b2(0, 0));
    }

    bool decide_reject(const Eigen::RowVectorXd& features) const {
        ad::Mat f(1, features.size());
        f.row(0) = features;
        return logits(f)(0) > 0.0;  // labels: 0 = accept, 1 = reject
    }
};

struct ProbeGrads {
    ad::Mat dw1, db1, dw2, db2;
    static ProbeGrads zeros_like(const ProbeModel& p) {
        return {ad::Mat::Zero(p.w1.rows(), p.w1.cols()), ad::Mat::Zero(1, ProbeModel::kHidden),
                ad::Mat::Zero(ProbeModel::kHidden, 1), ad::Mat::Zero(1, 1)};
    }
};

inline ad::Var probe_loss_graph(ad::Tape& tape, const ProbeModel& p, ProbeGrads* grads, const ad::Mat& X,
                                const std::vector<double>& labels) {
    ad::Var x = tape.constant_ref(&X);
    ad::Var w1 = grads ? tape.param(&p.w1, &grads->dw1) : tape.constant_ref(&p.w1);
    ad::Var b1 = grads ? tape.param(&p.b1, &grads->db1) : tape.constant_ref(&p.b1);
    ad::Var w2 = grads ? tape.param(&p.w2, &grads->dw2) : tape.constant_ref(&p.w2);
    ad::Var b2 = grads ? tape.param(&p.b2, &grads->db2) : tape.constant_ref(&p.b2);
    ad::Var h = tape.relu(tape.add_rowvec(tape.matmul(x, w1), b1));
    ad::Var z = tape.add_rowvec(tape.matmul(h, w2), b2);
    return tape.bce_with_logits(z, labels);
}

}  // namespace scopekit::scoping
