#pragma once

#include <vector>

#include "tchand/model.hpp"
#include "tchand/tensor.hpp"

namespace tchand::nn {

struct TrainSchedule {
    double base_lr = 1e-3;
    int warmup_epochs = 10;
    int total_epochs = 50;
    int batch_size = 32;
    int steps_per_epoch = 6;
};

// Linear warmup to base_lr, then cosine annealing to zero at total_epochs.
double lr_at(double epoch, const TrainSchedule& schedule);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Gradients for every model tensor, in visit order.
using GradBuffer = std::vector<Tensor<float>>;

GradBuffer zero_grads(const ModelParams& params);
void accumulate_grads(GradBuffer& into, const GradBuffer& from);
void scale_grads(GradBuffer& grads, float factor);

// Pulls parameter gradients out of a tape after backward().
template <class T>
GradBuffer grads_from_tape(Tape<T>& tape, ParamVars<T>& vars) {
    GradBuffer out;
    vars.visit([&](const char*, Var v) {
        const Tensor<T>& g = tape.grad(v);
        Tensor<float> f;
        f.shape = g.shape;
        f.data.resize(g.data.size());
        for (std::size_t i = 0; i < g.data.size(); ++i) f.data[i] = static_cast<float>(g.data[i]);
        out.push_back(std::move(f));
    });
    return out;
}

class Adam {
public:
    explicit Adam(const ModelParams& params, AdamConfig config = {});

    void step(ModelParams& params, const GradBuffer& grads, double lr);

    int64_t steps_taken() const { return t_; }

private:
    AdamConfig config_;
    std::vector<Tensor<float>> m_;
    std::vector<Tensor<float>> v_;
    int64_t t_ = 0;
};

} // namespace tchand::nn
