#include "tchand/optim.hpp"

#include <cmath>

namespace tchand::nn {

double lr_at(double epoch, const TrainSchedule& schedule) {
    if (schedule.warmup_epochs < 0 || schedule.warmup_epochs > schedule.total_epochs)
        throw InvalidConfig("warmup_epochs must lie in [0, total_epochs]");
    if (epoch >= schedule.total_epochs) return 0.0;
    if (schedule.warmup_epochs > 0 && epoch < schedule.warmup_epochs)
        return schedule.base_lr * (epoch / schedule.warmup_epochs);
    const double span = schedule.total_epochs - schedule.warmup_epochs;
    const double progress = span > 0 ? (epoch - schedule.warmup_epochs) / span : 1.0;
    return schedule.base_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

GradBuffer zero_grads(const ModelParams& params) {
    GradBuffer out;
    params.visit([&](const char*, const Tensor<float>& t) { out.push_back(Tensor<float>(t.shape)); });
    return out;
}

void accumulate_grads(GradBuffer& into, const GradBuffer& from) {
    if (into.size() != from.size()) throw ShapeMismatch("gradient buffer count mismatch");
    for (std::size_t i = 0; i < into.size(); ++i) {
        if (into[i].shape != from[i].shape) throw ShapeMismatch("gradient tensor shape mismatch");
        for (std::size_t j = 0; j < into[i].data.size(); ++j) into[i].data[j] += from[i].data[j];
    }
}

void scale_grads(GradBuffer& grads, float factor) {
    for (auto& g : grads)
        for (auto& v : g.data) v *= factor;
}

Adam::Adam(const ModelParams& params, AdamConfig config) : config_(config) {
    params.visit([&](const char*, const Tensor<float>& t) {
        m_.push_back(Tensor<float>(t.shape));
        v_.push_back(Tensor<float>(t.shape));
    });
}

void Adam::step(ModelParams& params, const GradBuffer& grads, double lr) {
    std::size_t idx = 0;
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    params.visit([&](const char*, Tensor<float>& p) {
        if (idx >= grads.size() || grads[idx].shape != p.shape)
            throw ShapeMismatch("adam state does not match parameters");
        auto& m = m_[idx];
        auto& v = v_[idx];
        const auto& g = grads[idx];
        for (std::size_t j = 0; j < p.data.size(); ++j) {
            const double gj = g.data[j];
            m.data[j] = static_cast<float>(config_.beta1 * m.data[j] + (1.0 - config_.beta1) * gj);
            v.data[j] = static_cast<float>(config_.beta2 * v.data[j] + (1.0 - config_.beta2) * gj * gj);
            const double mhat = m.data[j] / bc1;
            const double vhat = v.data[j] / bc2;
            p.data[j] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + config_.eps));
        }
        ++idx;
    });
}

} // namespace tchand::nn
