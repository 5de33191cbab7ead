#pragma once

#include <vector>

#include "tchand/geometry.hpp"
#include "tchand/hand_diff.hpp"
#include "tchand/model.hpp"
#include "tchand/tape.hpp"

namespace tchand::nn {

struct ContrastiveConfig {
    double tau = 0.5;
    int n_pos = 2;
    int n_neg = 8;
    int anchors_per_batch = 32;
    int radius = 15;
    // adds exp(sim_pos/tau) to its own denominator, the SimCLR-style
    // variant; off reproduces the plain negatives-only denominator
    bool positive_in_denominator = false;
};

// Defaults put the three terms on a common scale: reprojection errors are
// measured in pixels (tens), joint errors in meters (hundredths), and
// parameter errors in rotation units (tenths).
struct FineTuneLossWeights {
    double lambda_2d = 0.02;
    double lambda_3d = 10.0;
    double lambda_theta = 1.0;
};

// Per-anchor contrastive loss over cosine similarities,
//   L_i = -sum_j log( exp(sim(z_i,z_j)/tau) / sum_k exp(sim(z_i,z_k)/tau) )
// with positives j and negatives k, stabilized through logsumexp.
template <class T>
Var ntxent_loss(Tape<T>& tape, Var anchor, const std::vector<Var>& positives,
                const std::vector<Var>& negatives, double tau,
                bool positive_in_denominator = false) {
    if (positives.empty() || negatives.empty())
        throw EmptyBatch("ntxent needs at least one positive and one negative");
    if (!(tau > 0)) throw InvalidConfig("temperature must be positive");
    const T inv_tau = static_cast<T>(1.0 / tau);

    std::vector<Var> neg_sims;
    neg_sims.reserve(negatives.size());
    for (Var z : negatives) neg_sims.push_back(tape.scale(cosine_sim(tape, anchor, z), inv_tau));

    Var loss = tape.scalar_constant(T(0));
    if (!positive_in_denominator) {
        Var lse = logsumexp(tape, tape.pack(neg_sims));
        for (Var z : positives) {
            Var s = tape.scale(cosine_sim(tape, anchor, z), inv_tau);
            loss = tape.add(loss, tape.sub(lse, s));
        }
    } else {
        for (Var z : positives) {
            Var s = tape.scale(cosine_sim(tape, anchor, z), inv_tau);
            std::vector<Var> all = neg_sims;
            all.push_back(s);
            loss = tape.add(loss, tape.sub(logsumexp(tape, tape.pack(all)), s));
        }
    }
    return loss;
}

struct AnchorEmbeddings {
    Var anchor;
    std::vector<Var> positives;
    std::vector<Var> negatives;
};

// L = mean over anchors of the per-anchor loss.
template <class T>
Var batch_contrastive_loss(Tape<T>& tape, const std::vector<AnchorEmbeddings>& batch, double tau,
                           bool positive_in_denominator = false) {
    if (batch.empty()) throw EmptyBatch("contrastive batch is empty");
    Var total = tape.scalar_constant(T(0));
    for (const auto& a : batch)
        total = tape.add(total,
                         ntxent_loss(tape, a.anchor, a.positives, a.negatives, tau,
                                     positive_in_denominator));
    return tape.scale(total, T(1) / static_cast<T>(batch.size()));
}

// Ground truth for one supervised frame, flattened to match the head.
struct FrameTargets {
    std::vector<double> pose6d; // 96
    std::vector<double> beta;   // 10
    std::vector<double> j3d;    // 63
    std::vector<double> j2d;    // 42
};

template <class T>
struct FineTunePrediction {
    Var raw;      // {109}
    Var pose6d;   // {96}
    Var beta;     // {10}
    Var cam_s;    // scalar, softplus applied
    Var cam_t;    // {2}
    Var j3d_flat; // {63}
    Var j2d_flat; // {42}
};

template <class T>
FineTunePrediction<T> decode_head(Tape<T>& tape, const geom::KinematicTemplate& tmpl, Var raw109) {
    FineTunePrediction<T> p;
    p.raw = raw109;
    p.pose6d = tape.slice(raw109, 0, kPoseOutputs);
    p.beta = tape.slice(raw109, kPoseOutputs, kShapeOutputs);
    Var cam = tape.slice(raw109, kPoseOutputs + kShapeOutputs, kCameraOutputs);
    p.cam_s = tape.softplus(tape.component(cam, 0));
    p.cam_t = tape.slice(cam, 1, 2);
    HandForward<T> hand = hand_forward(tape, tmpl, p.pose6d, p.beta);
    p.j3d_flat = hand.j3d_flat;
    p.j2d_flat = project_flat(tape, hand, p.cam_s, p.cam_t);
    return p;
}

// L = l2d * mean|J2d - gt| + l3d * mean|J3d - gt| + ltheta * mean((theta,beta) - gt)^2
template <class T>
Var finetune_loss(Tape<T>& tape, const FineTunePrediction<T>& pred, const FrameTargets& gt,
                  const FineTuneLossWeights& w) {
    auto constant_of = [&](const std::vector<double>& v) {
        Tensor<T> t({static_cast<int>(v.size())});
        for (std::size_t i = 0; i < v.size(); ++i) t.data[i] = static_cast<T>(v[i]);
        return tape.constant(std::move(t));
    };
    Var l2d = tape.mean(tape.abs_(tape.sub(pred.j2d_flat, constant_of(gt.j2d))));
    Var l3d = tape.mean(tape.abs_(tape.sub(pred.j3d_flat, constant_of(gt.j3d))));
    std::vector<double> theta_gt = gt.pose6d;
    theta_gt.insert(theta_gt.end(), gt.beta.begin(), gt.beta.end());
    Var params_pred = tape.concat({pred.pose6d, pred.beta});
    Var d = tape.sub(params_pred, constant_of(theta_gt));
    Var ltheta = tape.mean(tape.mul(d, d));
    return tape.add(tape.add(tape.scale(l2d, static_cast<T>(w.lambda_2d)),
                             tape.scale(l3d, static_cast<T>(w.lambda_3d))),
                    tape.scale(ltheta, static_cast<T>(w.lambda_theta)));
}

} // namespace tchand::nn
