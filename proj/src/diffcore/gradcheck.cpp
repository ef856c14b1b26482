#include "simrecon/diffcore/gradcheck.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace simrecon::diff {

double finite_difference_check(const Graph<double>& graph, int loss_node,
                               const std::vector<int>& leaves, Session<double>& session,
                               double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference_check: h must be > 0");

    session.forward();
    session.backward(loss_node);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (int id : leaves) analytic.push_back(session.adjoint(id).v);

    auto loss_at = [&]() {
        session.forward();
        return session.value(loss_node).v[0];
    };

    double max_rel = 0.0;
    for (size_t li = 0; li < leaves.size(); ++li) {
        Tensor4<double>& x = session.leaf(leaves[li]);
        for (int64_t j = 0; j < x.numel(); ++j) {
            const double saved = x.v[size_t(j)];
            x.v[size_t(j)] = saved + h;
            const double lp = loss_at();
            x.v[size_t(j)] = saved - h;
            const double lm = loss_at();
            x.v[size_t(j)] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = analytic[li][size_t(j)];
            const double rel =
                std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-12});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

std::string primitive_name(Primitive p) {
    switch (p) {
        case Primitive::Conv2d: return "conv2d";
        case Primitive::Add: return "add";
        case Primitive::Mul: return "mul";
        case Primitive::Relu: return "relu";
        case Primitive::MaxPool2: return "maxpool2";
        case Primitive::Upsample2: return "upsample2";
        case Primitive::ConcatC: return "concat";
        case Primitive::PsfConv: return "psf_conv";
        case Primitive::BlockMean: return "block_mean";
        case Primitive::MeanReduce: return "mean";
        case Primitive::Ssim: return "ssim";
        case Primitive::TotalVar: return "total_variation";
    }
    return "?";
}

const std::vector<Primitive>& all_primitives() {
    static const std::vector<Primitive> all = {
        Primitive::Conv2d,   Primitive::Add,       Primitive::Mul,
        Primitive::Relu,     Primitive::MaxPool2,  Primitive::Upsample2,
        Primitive::ConcatC,  Primitive::PsfConv,   Primitive::BlockMean,
        Primitive::MeanReduce, Primitive::Ssim,    Primitive::TotalVar,
    };
    return all;
}

namespace {

void fill_uniform(Tensor4<double>& t, Rng& rng, double lo, double hi) {
    for (auto& v : t.v) v = lo + (hi - lo) * rng.uniform();
}

// Draws with |value| >= margin, keeping finite differences off the relu kink.
void fill_away_from_zero(Tensor4<double>& t, Rng& rng, double margin) {
    for (auto& v : t.v) {
        double x;
        do {
            x = 2.0 * rng.uniform() - 1.0;
        } while (std::abs(x) < margin);
        v = x;
    }
}

// Pool blocks need a clear winner or the finite difference straddles the tie.
void fill_pool_safe(Tensor4<double>& t, Rng& rng, double gap) {
    const int h = t.shape.h, w = t.shape.w;
    for (int p = 0; p < t.shape.n * t.shape.c; ++p)
        for (int by = 0; by < h / 2; ++by)
            for (int bx = 0; bx < w / 2; ++bx) {
                for (;;) {
                    double vals[4];
                    for (double& v : vals) v = rng.uniform();
                    double top = -1, second = -1;
                    for (double v : vals) {
                        if (v > top) {
                            second = top;
                            top = v;
                        } else if (v > second) {
                            second = v;
                        }
                    }
                    if (top - second < gap) continue;
                    int i = 0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            t.at(p / t.shape.c, p % t.shape.c, 2 * by + dy, 2 * bx + dx) =
                                vals[i++];
                    break;
                }
            }
}

std::shared_ptr<const fft::FreqKernel> random_freq_kernel(Rng& rng, int h, int w) {
    Raster k(GridSpec{5, 5, 1.0});
    double sum = 0.0;
    for (auto& v : k.v) {
        v = float(0.1 + rng.uniform());
        sum += v;
    }
    for (auto& v : k.v) v = float(double(v) / sum);
    return std::make_shared<fft::FreqKernel>(k, h, w);
}

// out -> mul(random projection) -> mean, so every output coordinate
// contributes a distinct weight to the scalar loss.
int project_to_scalar(Graph<double>& g, int out,
                      std::vector<std::pair<int, Tensor4<double>>>& pending, Rng& rng) {
    const Shape4 s = g.node(out).shape;
    if (s.numel() == 1) return out;
    const int proj = g.constant(s, "projection");
    Tensor4<double> pv(s);
    fill_uniform(pv, rng, -1.0, 1.0);
    pending.emplace_back(proj, std::move(pv));
    return g.mean(g.mul(out, proj));
}

} // namespace

double grad_check(Primitive p, Seed seed, double h) {
    Rng rng = Rng(seed).fork("gradcheck/" + primitive_name(p));
    Graph<double> g;
    std::vector<int> check;
    std::vector<std::pair<int, Tensor4<double>>> pending; // (leaf, value)

    auto make_param = [&](Shape4 s, const std::string& name, double lo, double hi) {
        const int id = g.parameter(s, name);
        Tensor4<double> t(s);
        fill_uniform(t, rng, lo, hi);
        pending.emplace_back(id, std::move(t));
        check.push_back(id);
        return id;
    };

    int out = -1;
    switch (p) {
        case Primitive::Conv2d: {
            const int x = make_param({1, 2, 5, 5}, "x", -1.0, 1.0);
            const int k = make_param({3, 2, 3, 3}, "k", -1.0, 1.0);
            const int b = make_param({1, 3, 1, 1}, "b", -0.5, 0.5);
            out = g.conv2d(x, k, b);
            break;
        }
        case Primitive::Add: {
            const int a = make_param({1, 1, 5, 5}, "a", -1.0, 1.0);
            const int b = make_param({1, 1, 5, 5}, "b", -1.0, 1.0);
            out = g.add(a, b);
            break;
        }
        case Primitive::Mul: {
            const int a = make_param({1, 1, 5, 5}, "a", -1.0, 1.0);
            const int b = make_param({1, 1, 5, 5}, "b", -1.0, 1.0);
            out = g.mul(a, b);
            break;
        }
        case Primitive::Relu: {
            const int x = g.parameter({1, 2, 5, 5}, "x");
            Tensor4<double> t(Shape4{1, 2, 5, 5});
            fill_away_from_zero(t, rng, 50.0 * h);
            pending.emplace_back(x, std::move(t));
            check.push_back(x);
            out = g.relu(x);
            break;
        }
        case Primitive::MaxPool2: {
            const int x = g.parameter({1, 2, 4, 4}, "x");
            Tensor4<double> t(Shape4{1, 2, 4, 4});
            fill_pool_safe(t, rng, 50.0 * h);
            pending.emplace_back(x, std::move(t));
            check.push_back(x);
            out = g.maxpool2(x);
            break;
        }
        case Primitive::Upsample2: {
            const int x = make_param({1, 1, 4, 4}, "x", -1.0, 1.0);
            out = g.upsample2(x);
            break;
        }
        case Primitive::ConcatC: {
            const int a = make_param({1, 2, 4, 4}, "a", -1.0, 1.0);
            const int b = make_param({1, 1, 4, 4}, "b", -1.0, 1.0);
            out = g.concat_channels({a, b});
            break;
        }
        case Primitive::PsfConv: {
            const int x = make_param({1, 1, 8, 8}, "x", -1.0, 1.0);
            out = g.psf_conv(x, random_freq_kernel(rng, 8, 8));
            break;
        }
        case Primitive::BlockMean: {
            const int x = make_param({1, 1, 6, 6}, "x", -1.0, 1.0);
            out = g.block_mean(x, 2);
            break;
        }
        case Primitive::MeanReduce: {
            const int x = make_param({1, 1, 5, 5}, "x", -1.0, 1.0);
            out = g.mean(x);
            break;
        }
        case Primitive::Ssim: {
            const int x = make_param({1, 1, 12, 12}, "x", 0.1, 0.9);
            const int y = make_param({1, 1, 12, 12}, "y", 0.1, 0.9);
            auto sc = std::make_shared<kernels::SsimConsts>(kernels::make_ssim_consts());
            out = g.ssim(x, y, sc);
            break;
        }
        case Primitive::TotalVar: {
            // separable ramps with increments >= 0.05 keep every forward
            // difference far from the sqrt kink at the smoothing scale
            const int x = g.parameter({1, 1, 5, 5}, "x");
            Tensor4<double> t(Shape4{1, 1, 5, 5});
            std::array<double, 5> row{}, col{};
            for (int i = 1; i < 5; ++i) {
                row[size_t(i)] = row[size_t(i - 1)] + 0.05 + 0.25 * rng.uniform();
                col[size_t(i)] = col[size_t(i - 1)] + 0.05 + 0.25 * rng.uniform();
            }
            for (int yy = 0; yy < 5; ++yy)
                for (int xx = 0; xx < 5; ++xx)
                    t.at(0, 0, yy, xx) = row[size_t(xx)] + col[size_t(yy)];
            pending.emplace_back(x, std::move(t));
            check.push_back(x);
            out = g.total_variation(x, 1e-6);
            break;
        }
    }

    const int loss = project_to_scalar(g, out, pending, rng);
    Session<double> session(g);
    for (auto& [id, val] : pending) session.leaf(id) = std::move(val);
    return finite_difference_check(g, loss, check, session, h);
}

double grad_check_composition(Seed seed, double h) {
    Rng rng = Rng(seed).fork("gradcheck/composition");
    Graph<double> g;
    std::vector<int> check;
    std::vector<std::pair<int, Tensor4<double>>> pending;

    Shape4 shape{1, 2, 8, 8};
    const int input = g.parameter(shape, "x");
    {
        Tensor4<double> t(shape);
        fill_uniform(t, rng, -1.0, 1.0);
        pending.emplace_back(input, std::move(t));
    }
    check.push_back(input);

    // Smooth-everywhere ops only; relu/maxpool kinks are checked standalone.
    int out = input;
    for (int step = 0; step < 3; ++step) {
        const Shape4 s = g.node(out).shape;
        const int pick = int(rng.next_u64() % 6);
        switch (pick) {
            case 0: { // conv2d
                const int k = g.parameter({2, s.c, 3, 3}, "k" + std::to_string(step));
                const int b = g.parameter({1, 2, 1, 1}, "b" + std::to_string(step));
                Tensor4<double> kv(Shape4{2, s.c, 3, 3}), bv(Shape4{1, 2, 1, 1});
                fill_uniform(kv, rng, -0.5, 0.5);
                fill_uniform(bv, rng, -0.2, 0.2);
                pending.emplace_back(k, std::move(kv));
                pending.emplace_back(b, std::move(bv));
                check.push_back(k);
                check.push_back(b);
                out = g.conv2d(out, k, b);
                break;
            }
            case 1: { // mul by parameter
                const int m = g.parameter(s, "m" + std::to_string(step));
                Tensor4<double> mv(s);
                fill_uniform(mv, rng, -1.0, 1.0);
                pending.emplace_back(m, std::move(mv));
                check.push_back(m);
                out = g.mul(out, m);
                break;
            }
            case 2: { // add parameter
                const int a = g.parameter(s, "a" + std::to_string(step));
                Tensor4<double> av(s);
                fill_uniform(av, rng, -1.0, 1.0);
                pending.emplace_back(a, std::move(av));
                check.push_back(a);
                out = g.add(out, a);
                break;
            }
            case 3:
                out = s.h >= 8 ? g.block_mean(out, 2) : g.upsample2(out);
                break;
            case 4:
                out = s.h <= 8 ? g.upsample2(out) : g.block_mean(out, 2);
                break;
            case 5:
                out = g.psf_conv(out, random_freq_kernel(rng, s.h, s.w));
                break;
        }
    }

    const int loss = project_to_scalar(g, out, pending, rng);
    Session<double> session(g);
    for (auto& [id, val] : pending) session.leaf(id) = std::move(val);
    return finite_difference_check(g, loss, check, session, h);
}

} // namespace simrecon::diff
