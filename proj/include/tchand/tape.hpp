#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "tchand/errors.hpp"
#include "tchand/tensor.hpp"

namespace tchand::nn {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are created by the op members below; backward()
// walks them once in reverse creation order, so accumulation order is fixed
// and results do not depend on scheduling. T is float in training and
// double in gradient-check instantiations.
template <class T>
class Tape {
public:
    Var leaf(Tensor<T> value) { return push(std::move(value), true, {}); }
    Var constant(Tensor<T> value) { return push(std::move(value), false, {}); }
    Var scalar_constant(T v) { return constant(Tensor<T>({}, {v})); }

    const Tensor<T>& val(Var v) const { return nodes_[check(v)].value; }

    const Tensor<T>& grad(Var v) const {
        if (!ran_backward_) throw GraphNotBuilt("backward() has not run on this tape");
        return nodes_[check(v)].grad;
    }

    void backward(Var root) {
        auto& r = nodes_[check(root)];
        if (r.value.size() != 1) throw ShapeMismatch("backward root must be a scalar");
        for (auto& n : nodes_)
            if (n.requires_grad) n.grad = Tensor<T>(n.value.shape);
        if (r.requires_grad) r.grad.data[0] = T(1);
        for (int i = root.id; i >= 0; --i) {
            auto& n = nodes_[static_cast<std::size_t>(i)];
            if (n.requires_grad && n.back) n.back(*this);
        }
        ran_backward_ = true;
    }

    std::size_t node_count() const { return nodes_.size(); }

    // ---- elementwise ----

    Var add(Var a, Var b) {
        require_same_shape(a, b);
        Tensor<T> out = val(a);
        const auto& bv = val(b).data;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv[i];
        return push(std::move(out), needs(a) || needs(b), make_back2({a, b}, [](Tape& t, int self, Var a, Var b) {
                        const auto& g = t.nodes_[self].grad.data;
                        t.accumulate(a, [&](std::size_t i) { return g[i]; });
                        t.accumulate(b, [&](std::size_t i) { return g[i]; });
                    }));
    }

    Var sub(Var a, Var b) {
        require_same_shape(a, b);
        Tensor<T> out = val(a);
        const auto& bv = val(b).data;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bv[i];
        return push(std::move(out), needs(a) || needs(b), make_back2({a, b}, [](Tape& t, int self, Var a, Var b) {
                        const auto& g = t.nodes_[self].grad.data;
                        t.accumulate(a, [&](std::size_t i) { return g[i]; });
                        t.accumulate(b, [&](std::size_t i) { return -g[i]; });
                    }));
    }

    Var mul(Var a, Var b) {
        require_same_shape(a, b);
        Tensor<T> out = val(a);
        const auto& bv = val(b).data;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv[i];
        return push(std::move(out), needs(a) || needs(b), make_back2({a, b}, [](Tape& t, int self, Var a, Var b) {
                        const auto& g = t.nodes_[self].grad.data;
                        const auto& av = t.nodes_[a.id].value.data;
                        const auto& bv2 = t.nodes_[b.id].value.data;
                        t.accumulate(a, [&](std::size_t i) { return g[i] * bv2[i]; });
                        t.accumulate(b, [&](std::size_t i) { return g[i] * av[i]; });
                    }));
    }

    Var scale(Var a, T c) {
        Tensor<T> out = val(a);
        for (auto& v : out.data) v *= c;
        return push(std::move(out), needs(a), make_back1({a}, [c](Tape& t, int self, Var a) {
                        const auto& g = t.nodes_[self].grad.data;
                        t.accumulate(a, [&](std::size_t i) { return g[i] * c; });
                    }));
    }

    Var add_const(Var a, T c) {
        Tensor<T> out = val(a);
        for (auto& v : out.data) v += c;
        return push(std::move(out), needs(a), make_back1({a}, [](Tape& t, int self, Var a) {
                        const auto& g = t.nodes_[self].grad.data;
                        t.accumulate(a, [&](std::size_t i) { return g[i]; });
                    }));
    }

    Var neg(Var a) { return scale(a, T(-1)); }

    Var relu(Var a) {
        Tensor<T> out = val(a);
        for (auto& v : out.data) v = v > T(0) ? v : T(0);
        return push(std::move(out), needs(a), make_back1({a}, [](Tape& t, int self, Var a) {
                        const auto& g = t.nodes_[self].grad.data;
                        const auto& av = t.nodes_[a.id].value.data;
                        t.accumulate(a, [&](std::size_t i) { return av[i] > T(0) ? g[i] : T(0); });
                    }));
    }

    Var exp_(Var a) {
        Tensor<T> out = val(a);
        for (auto& v : out.data) v = std::exp(v);
        return push(std::move(out), needs(a), make_back1({a}, [](Tape& t, int self, Var a) {
                        const auto& g = t.nodes_[self].grad.data;
                        const auto& ov = t.nodes_[self].value.data;
                        t.accumulate(a, [&](std::size_t i) { return g[i] * ov[i]; });
                    }));
    }

    Var log_(Var a) {
        Tensor<T> out = val(a);
        for (auto& v : out.data) v = std::log(v);
        return push(std::move(out), needs(a), make_back1({a}, [](Tape& t, int self, Var a) {
                        const auto& g = t.nodes_[self].grad.data;
                        const auto& av = t.nodes_[a.id].value.data;
                        t.accumulate(a, [&](std::size_t i) { return g[i] / av[i]; });
                    }));
    }

    Var sqrt_(Var a) {
        Tensor<T> out = val(a);
        for (auto& v : out.data) v = std::sqrt(v);
        return push(std::move(out), needs(a), make_back1({a}, [](Tape& t, int self, Var a) {
                        const auto& g = t.nodes_[self].grad.data;
                        const auto& ov = t.nodes_[self].value.data;
                        t.accumulate(a, [&](std::size_t i) { return g[i] / (T(2) * ov[i]); });
                    }));
    }

    Var abs_(Var a) {
        Tensor<T> out = val(a);
        for (auto& v : out.data) v = std::abs(v);
        return push(std::move(out), needs(a), make_back1({a}, [](Tape& t, int self, Var a) {
                        const auto& g = t.nodes_[self].grad.data;
                        const auto& av = t.nodes_[a.id].value.data;
                        t.accumulate(a, [&](std::size_t i) {
                            return av[i] > T(0) ? g[i] : (av[i] < T(0) ? -g[i] : T(0));
                        });
                    }));
    }

    Var softplus(Var a) {
        Tensor<T> out = val(a);
        for (auto& v : out.data)
            v = v > T(30) ? v : std::log1p(std::exp(v)); // avoids overflow, exact past 30
        return push(std::move(out), needs(a), make_back1({a}, [](Tape& t, int self, Var a) {
                        const auto& g = t.nodes_[self].grad.data;
                        const auto& av = t.nodes_[a.id].value.data;
                        t.accumulate(a, [&](std::size_t i) {
                            return g[i] / (T(1) + std::exp(-av[i]));
                        });
                    }));
    }

    // ---- reductions and vector ops ----

    Var sum(Var a) {
        T acc = T(0);
        for (T v : val(a).data) acc += v;
        return push(Tensor<T>({}, {acc}), needs(a), make_back1({a}, [](Tape& t, int self, Var a) {
                        const T g = t.nodes_[self].grad.data[0];
                        t.accumulate(a, [&](std::size_t) { return g; });
                    }));
    }

    Var mean(Var a) {
        const T inv = T(1) / static_cast<T>(val(a).size());
        return scale(sum(a), inv);
    }

    Var dot(Var a, Var b) {
        require_same_shape(a, b);
        const auto& av = val(a).data;
        const auto& bv = val(b).data;
        T acc = T(0);
        for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
        return push(Tensor<T>({}, {acc}), needs(a) || needs(b), make_back2({a, b}, [](Tape& t, int self, Var a, Var b) {
                        const T g = t.nodes_[self].grad.data[0];
                        const auto& av2 = t.nodes_[a.id].value.data;
                        const auto& bv2 = t.nodes_[b.id].value.data;
                        t.accumulate(a, [&](std::size_t i) { return g * bv2[i]; });
                        t.accumulate(b, [&](std::size_t i) { return g * av2[i]; });
                    }));
    }

    // scalar * tensor broadcast
    Var mul_scalar(Var a, Var s) {
        if (val(s).size() != 1) throw ShapeMismatch("mul_scalar needs a scalar");
        Tensor<T> out = val(a);
        const T sv = val(s).data[0];
        for (auto& v : out.data) v *= sv;
        return push(std::move(out), needs(a) || needs(s), make_back2({a, s}, [](Tape& t, int self, Var a, Var s) {
                        const auto& g = t.nodes_[self].grad.data;
                        const T sv2 = t.nodes_[s.id].value.data[0];
                        const auto& av = t.nodes_[a.id].value.data;
                        t.accumulate(a, [&](std::size_t i) { return g[i] * sv2; });
                        if (t.needs(s)) {
                            T acc = T(0);
                            for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
                            t.nodes_[s.id].grad.data[0] += acc;
                        }
                    }));
    }

    Var reciprocal(Var s) {
        if (val(s).size() != 1) throw ShapeMismatch("reciprocal needs a scalar");
        const T v = val(s).data[0];
        return push(Tensor<T>({}, {T(1) / v}), needs(s), make_back1({s}, [](Tape& t, int self, Var s) {
                        const T g = t.nodes_[self].grad.data[0];
                        const T ov = t.nodes_[self].value.data[0];
                        if (t.needs(s)) t.nodes_[s.id].grad.data[0] += -g * ov * ov;
                    }));
    }

    Var component(Var a, int index) {
        const auto& av = val(a).data;
        if (index < 0 || static_cast<std::size_t>(index) >= av.size())
            throw ShapeMismatch("component index out of range");
        return push(Tensor<T>({}, {av[static_cast<std::size_t>(index)]}), needs(a),
                    make_back1({a}, [index](Tape& t, int self, Var a) {
                        const T g = t.nodes_[self].grad.data[0];
                        if (t.needs(a))
                            t.nodes_[a.id].grad.data[static_cast<std::size_t>(index)] += g;
                    }));
    }

    Var pack(const std::vector<Var>& scalars) {
        Tensor<T> out({static_cast<int>(scalars.size())});
        bool any = false;
        for (std::size_t i = 0; i < scalars.size(); ++i) {
            if (val(scalars[i]).size() != 1) throw ShapeMismatch("pack needs scalars");
            out.data[i] = val(scalars[i]).data[0];
            any = any || needs(scalars[i]);
        }
        std::vector<Var> parents = scalars;
        auto back = [parents](Tape& t, int self) {
            const auto& g = t.nodes_[self].grad.data;
            for (std::size_t i = 0; i < parents.size(); ++i)
                if (t.needs(parents[i])) t.nodes_[parents[i].id].grad.data[0] += g[i];
        };
        return push(std::move(out), any,
                    [back](Tape& t, int self) { back(t, self); }, true);
    }

    // contiguous range [offset, offset+length) of a flattened tensor
    Var slice(Var a, int offset, int length) {
        const auto& av = val(a).data;
        if (offset < 0 || length < 0 ||
            static_cast<std::size_t>(offset + length) > av.size())
            throw ShapeMismatch("slice range out of bounds");
        Tensor<T> out({length});
        for (int i = 0; i < length; ++i) out.data[static_cast<std::size_t>(i)] = av[static_cast<std::size_t>(offset + i)];
        return push(std::move(out), needs(a), make_back1({a}, [offset, length](Tape& t, int self, Var a2) {
                        if (!t.needs(a2)) return;
                        const auto& g = t.nodes_[self].grad.data;
                        auto& ga = t.nodes_[a2.id].grad.data;
                        for (int i = 0; i < length; ++i)
                            ga[static_cast<std::size_t>(offset + i)] += g[static_cast<std::size_t>(i)];
                    }));
    }

    // flattens and concatenates
    Var concat(const std::vector<Var>& parts) {
        if (parts.empty()) throw EmptyBatch("concat of nothing");
        int total = 0;
        bool any = false;
        for (Var p : parts) {
            total += static_cast<int>(val(p).size());
            any = any || needs(p);
        }
        Tensor<T> out({total});
        std::size_t at = 0;
        for (Var p : parts) {
            const auto& pv = val(p).data;
            for (T v : pv) out.data[at++] = v;
        }
        std::vector<Var> parents = parts;
        return push(std::move(out), any, [parents](Tape& t, int self) {
            const auto& g = t.nodes_[self].grad.data;
            std::size_t at2 = 0;
            for (Var p : parents) {
                auto& node = t.nodes_[p.id];
                if (node.requires_grad) {
                    for (std::size_t i = 0; i < node.value.data.size(); ++i)
                        node.grad.data[i] += g[at2 + i];
                }
                at2 += node.value.data.size();
            }
        });
    }

    Var cross3(Var a, Var b) {
        if (val(a).size() != 3 || val(b).size() != 3) throw ShapeMismatch("cross3 needs 3-vectors");
        const auto& u = val(a).data;
        const auto& v = val(b).data;
        Tensor<T> out({3});
        out.data[0] = u[1] * v[2] - u[2] * v[1];
        out.data[1] = u[2] * v[0] - u[0] * v[2];
        out.data[2] = u[0] * v[1] - u[1] * v[0];
        return push(std::move(out), needs(a) || needs(b), make_back2({a, b}, [](Tape& t, int self, Var a, Var b) {
                        const auto& g = t.nodes_[self].grad.data;
                        const auto& u2 = t.nodes_[a.id].value.data;
                        const auto& v2 = t.nodes_[b.id].value.data;
                        // c = u x v: grad_u = v x g, grad_v = g x u
                        t.accumulate3(a, v2[1] * g[2] - v2[2] * g[1], v2[2] * g[0] - v2[0] * g[2],
                                      v2[0] * g[1] - v2[1] * g[0], true);
                        t.accumulate3(b, g[1] * u2[2] - g[2] * u2[1], g[2] * u2[0] - g[0] * u2[2],
                                      g[0] * u2[1] - g[1] * u2[0], false);
                    }));
    }

    // ---- neural network ops ----

    // x: [H,W,IC], w: [OC,KH,KW,IC], b: [OC]; stride 2, zero padding 1
    Var conv2d(Var x, Var w, Var b) {
        const auto& xs = val(x).shape;
        const auto& ws = val(w).shape;
        if (xs.size() != 3 || ws.size() != 4 || ws[3] != xs[2])
            throw ShapeMismatch("conv2d shape mismatch");
        const int H = xs[0], W = xs[1], IC = xs[2];
        const int OC = ws[0], KH = ws[1], KW = ws[2];
        const int OH = (H + 1) / 2, OW = (W + 1) / 2;
        Tensor<T> out({OH, OW, OC});
        const T* xv = val(x).data.data();
        const T* wv = val(w).data.data();
        const T* bv = val(b).data.data();
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                T* o = out.data.data() + (static_cast<std::size_t>(oy) * OW + ox) * OC;
                for (int oc = 0; oc < OC; ++oc) o[oc] = bv[oc];
                for (int ky = 0; ky < KH; ++ky) {
                    const int iy = 2 * oy - 1 + ky;
                    if (iy < 0 || iy >= H) continue;
                    for (int kx = 0; kx < KW; ++kx) {
                        const int ix = 2 * ox - 1 + kx;
                        if (ix < 0 || ix >= W) continue;
                        const T* xp = xv + (static_cast<std::size_t>(iy) * W + ix) * IC;
                        for (int oc = 0; oc < OC; ++oc) {
                            const T* wp = wv + ((static_cast<std::size_t>(oc) * KH + ky) * KW + kx) * IC;
                            T acc = T(0);
                            for (int ic = 0; ic < IC; ++ic) acc += wp[ic] * xp[ic];
                            o[oc] += acc;
                        }
                    }
                }
            }
        }
        auto back = [H, W, IC, OC, KH, KW, OH, OW](Tape& t, int self, Var x2, Var w2, Var b2) {
            const auto& g = t.nodes_[self].grad.data;
            const auto& xv2 = t.nodes_[x2.id].value.data;
            const auto& wv2 = t.nodes_[w2.id].value.data;
            const bool need_x = t.needs(x2);
            const bool need_w = t.needs(w2);
            const bool need_b = t.needs(b2);
            T* gx = need_x ? t.nodes_[x2.id].grad.data.data() : nullptr;
            T* gw = need_w ? t.nodes_[w2.id].grad.data.data() : nullptr;
            T* gb = need_b ? t.nodes_[b2.id].grad.data.data() : nullptr;
            for (int oy = 0; oy < OH; ++oy) {
                for (int ox = 0; ox < OW; ++ox) {
                    const T* go = g.data() + (static_cast<std::size_t>(oy) * OW + ox) * OC;
                    if (need_b)
                        for (int oc = 0; oc < OC; ++oc) gb[oc] += go[oc];
                    for (int ky = 0; ky < KH; ++ky) {
                        const int iy = 2 * oy - 1 + ky;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < KW; ++kx) {
                            const int ix = 2 * ox - 1 + kx;
                            if (ix < 0 || ix >= W) continue;
                            const std::size_t xoff = (static_cast<std::size_t>(iy) * W + ix) * IC;
                            for (int oc = 0; oc < OC; ++oc) {
                                const T go_oc = go[oc];
                                if (go_oc == T(0)) continue;
                                const std::size_t woff =
                                    ((static_cast<std::size_t>(oc) * KH + ky) * KW + kx) * IC;
                                if (need_x)
                                    for (int ic = 0; ic < IC; ++ic)
                                        gx[xoff + ic] += wv2[woff + ic] * go_oc;
                                if (need_w)
                                    for (int ic = 0; ic < IC; ++ic)
                                        gw[woff + ic] += xv2[xoff + ic] * go_oc;
                            }
                        }
                    }
                }
            }
        };
        return push(std::move(out), needs(x) || needs(w) || needs(b),
                    make_back3({x, w, b}, back));
    }

    Var global_avg_pool(Var x) {
        const auto& xs = val(x).shape;
        if (xs.size() != 3) throw ShapeMismatch("global_avg_pool expects [H,W,C]");
        const int H = xs[0], W = xs[1], C = xs[2];
        Tensor<T> out({C});
        const T* xv = val(x).data.data();
        for (int i = 0; i < H * W; ++i)
            for (int c = 0; c < C; ++c) out.data[static_cast<std::size_t>(c)] += xv[static_cast<std::size_t>(i) * C + c];
        const T inv = T(1) / static_cast<T>(H * W);
        for (auto& v : out.data) v *= inv;
        return push(std::move(out), needs(x), make_back1({x}, [H, W, C, inv](Tape& t, int self, Var x2) {
                        const auto& g = t.nodes_[self].grad.data;
                        if (!t.needs(x2)) return;
                        T* gx = t.nodes_[x2.id].grad.data.data();
                        for (int i = 0; i < H * W; ++i)
                            for (int c = 0; c < C; ++c)
                                gx[static_cast<std::size_t>(i) * C + c] += g[static_cast<std::size_t>(c)] * inv;
                    }));
    }

    // w: [OUT, IN], b: [OUT], x: [IN]
    Var linear(Var w, Var b, Var x) {
        const auto& ws = val(w).shape;
        const auto& xsz = val(x).size();
        if (ws.size() != 2 || static_cast<std::size_t>(ws[1]) != xsz)
            throw ShapeMismatch("linear shape mismatch");
        const int OUT = ws[0], IN = ws[1];
        Tensor<T> out({OUT});
        const T* wv = val(w).data.data();
        const T* xv = val(x).data.data();
        const T* bv = val(b).data.data();
        for (int o = 0; o < OUT; ++o) {
            T acc = bv[o];
            const T* wr = wv + static_cast<std::size_t>(o) * IN;
            for (int i = 0; i < IN; ++i) acc += wr[i] * xv[i];
            out.data[static_cast<std::size_t>(o)] = acc;
        }
        auto back = [OUT, IN](Tape& t, int self, Var w2, Var b2, Var x2) {
            const auto& g = t.nodes_[self].grad.data;
            const auto& wv2 = t.nodes_[w2.id].value.data;
            const auto& xv2 = t.nodes_[x2.id].value.data;
            if (t.needs(b2)) {
                T* gb = t.nodes_[b2.id].grad.data.data();
                for (int o = 0; o < OUT; ++o) gb[o] += g[static_cast<std::size_t>(o)];
            }
            if (t.needs(w2)) {
                T* gw = t.nodes_[w2.id].grad.data.data();
                for (int o = 0; o < OUT; ++o)
                    for (int i = 0; i < IN; ++i)
                        gw[static_cast<std::size_t>(o) * IN + i] += g[static_cast<std::size_t>(o)] * xv2[i];
            }
            if (t.needs(x2)) {
                T* gx = t.nodes_[x2.id].grad.data.data();
                for (int o = 0; o < OUT; ++o) {
                    const T go = g[static_cast<std::size_t>(o)];
                    const T* wr = wv2.data() + static_cast<std::size_t>(o) * IN;
                    for (int i = 0; i < IN; ++i) gx[i] += wr[i] * go;
                }
            }
        };
        return push(std::move(out), needs(w) || needs(b) || needs(x), make_back3({w, b, x}, back));
    }

    bool needs(Var v) const { return nodes_[check(v)].requires_grad; }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool requires_grad = false;
        std::function<void(Tape&, int)> back_fn;
        std::function<void(Tape&)> back; // bound with node id
    };

    std::vector<Node> nodes_;
    bool ran_backward_ = false;

    int check(Var v) const {
        if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
            throw GraphNotBuilt("variable does not belong to this tape");
        return v.id;
    }

    void require_same_shape(Var a, Var b) const {
        if (val(a).shape != val(b).shape) throw ShapeMismatch("operand shape mismatch");
    }

    template <class F>
    void accumulate(Var v, F&& per_index) {
        if (!needs(v)) return;
        auto& g = nodes_[v.id].grad.data;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += per_index(i);
    }

    void accumulate3(Var v, T x, T y, T z, bool /*tag*/) {
        if (!needs(v)) return;
        auto& g = nodes_[v.id].grad.data;
        g[0] += x;
        g[1] += y;
        g[2] += z;
    }

    Var push(Tensor<T> value, bool requires_grad, std::function<void(Tape&, int)> back_fn,
             bool = false) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        const int id = static_cast<int>(nodes_.size());
        if (back_fn) {
            n.back = [back_fn = std::move(back_fn), id](Tape& t) { back_fn(t, id); };
        }
        nodes_.push_back(std::move(n));
        return Var{id};
    }

    template <class F>
    std::function<void(Tape&, int)> make_back1(std::array<Var, 1> parents, F&& f) {
        Var a = parents[0];
        return [f = std::forward<F>(f), a](Tape& t, int self) { f(t, self, a); };
    }

    template <class F>
    std::function<void(Tape&, int)> make_back2(std::array<Var, 2> parents, F&& f) {
        Var a = parents[0], b = parents[1];
        return [f = std::forward<F>(f), a, b](Tape& t, int self) { f(t, self, a, b); };
    }

    template <class F>
    std::function<void(Tape&, int)> make_back3(std::array<Var, 3> parents, F&& f) {
        Var a = parents[0], b = parents[1], c = parents[2];
        return [f = std::forward<F>(f), a, b, c](Tape& t, int self) { f(t, self, a, b, c); };
    }
};

// ---- composite helpers ----

// u / ||u||, with a tiny epsilon under the square root for training
// robustness. eps = 0 gives the exact map.
template <class T>
Var normalized(Tape<T>& t, Var u, T eps = T(0)) {
    Var n2 = t.dot(u, u);
    Var inv = t.reciprocal(t.sqrt_(t.add_const(n2, eps)));
    return t.mul_scalar(u, inv);
}

template <class T>
Var cosine_sim(Tape<T>& t, Var u, Var v) {
    const auto& uv = t.val(u).data;
    const auto& vv = t.val(v).data;
    auto sqnorm = [](const std::vector<T>& x) {
        T acc = T(0);
        for (T e : x) acc += e * e;
        return acc;
    };
    if (std::sqrt(sqnorm(uv)) <= T(1e-12) || std::sqrt(sqnorm(vv)) <= T(1e-12))
        throw ZeroVector("cosine similarity of a zero vector");
    Var nu = t.reciprocal(t.sqrt_(t.dot(u, u)));
    Var nv = t.reciprocal(t.sqrt_(t.dot(v, v)));
    return t.mul_scalar(t.mul_scalar(t.dot(u, v), nu), nv);
}

// log sum_i exp(x_i) with the usual max subtraction; the shift is exact for
// any constant, so treating the max as data is gradient-correct.
template <class T>
Var logsumexp(Tape<T>& t, Var x) {
    const auto& xv = t.val(x).data;
    if (xv.empty()) throw EmptyBatch("logsumexp of empty vector");
    T m = xv[0];
    for (T v : xv) m = std::max(m, v);
    Var shifted = t.add_const(x, -m);
    Var s = t.sum(t.exp_(shifted));
    return t.add_const(t.log_(s), m);
}

} // namespace tchand::nn
