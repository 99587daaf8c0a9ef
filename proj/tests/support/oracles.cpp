#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oracle {

namespace {

int wrap(int i, int n) {
    i %= n;
    return i < 0 ? i + n : i;
}

double lse(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (m == -std::numeric_limits<double>::infinity()) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace

cg::Plane prefix_sum(const cg::Plane& p) {
    cg::Plane out(p.ex(), p.ey());
    for (int kx = 0; kx < p.ex(); ++kx)
        for (int ky = 0; ky < p.ey(); ++ky) {
            double acc = 0.0;
            for (int ix = 0; ix <= kx; ++ix)
                for (int iy = 0; iy <= ky; ++iy) acc += p.at(ix, iy);
            out.at(kx, ky) = acc;
        }
    return out;
}

cg::Plane window_sum(const cg::Plane& p, cg::WindowSpec w) {
    cg::Plane out(p.ex(), p.ey());
    for (int kx = 0; kx < p.ex(); ++kx)
        for (int ky = 0; ky < p.ey(); ++ky) {
            double acc = 0.0;
            for (int ix = 0; ix < w.wx; ++ix)
                for (int iy = 0; iy < w.wy; ++iy)
                    acc += p.at(wrap(kx + ix, p.ex()), wrap(ky + iy, p.ey()));
            out.at(kx, ky) = acc;
        }
    return out;
}

std::vector<cg::Plane> sector_sums(const cg::Plane& p, cg::WindowSpec w, cg::TessellationSpec s) {
    const int bx = w.wx / s.sx, by = w.wy / s.sy;
    std::vector<cg::Plane> out;
    for (int sx = 0; sx < s.sx; ++sx) {
        for (int sy = 0; sy < s.sy; ++sy) {
            cg::Plane plane(p.ex(), p.ey());
            for (int kx = 0; kx < p.ex(); ++kx)
                for (int ky = 0; ky < p.ey(); ++ky) {
                    double acc = 0.0;
                    for (int ix = 0; ix < bx; ++ix)
                        for (int iy = 0; iy < by; ++iy)
                            acc += p.at(wrap(kx + sx * bx + ix, p.ex()),
                                        wrap(ky + sy * by + iy, p.ey()));
                    plane.at(kx, ky) = acc;
                }
            out.push_back(std::move(plane));
        }
    }
    return out;
}

cg::Plane trailing_window_sum(const cg::Plane& p, cg::WindowSpec w) {
    cg::Plane out(p.ex(), p.ey());
    for (int ix = 0; ix < p.ex(); ++ix)
        for (int iy = 0; iy < p.ey(); ++iy) {
            double acc = 0.0;
            // all anchors k whose window contains (ix, iy)
            for (int kx = 0; kx < p.ex(); ++kx)
                for (int ky = 0; ky < p.ey(); ++ky)
                    if (wrap(ix - kx, p.ex()) < w.wx && wrap(iy - ky, p.ey()) < w.wy)
                        acc += p.at(kx, ky);
            out.at(ix, iy) = acc;
        }
    return out;
}

std::vector<double> window_histograms(const cg::CountingGrid& g) {
    std::vector<double> h(static_cast<std::size_t>(g.cells()) * g.vocab, 0.0);
    for (int kx = 0; kx < g.ex; ++kx)
        for (int ky = 0; ky < g.ey; ++ky)
            for (int z = 0; z < g.vocab; ++z) {
                double acc = 0.0;
                for (int ix = 0; ix < g.window.wx; ++ix)
                    for (int iy = 0; iy < g.window.wy; ++iy)
                        acc += g.pi_at(wrap(kx + ix, g.ex) * g.ey + wrap(ky + iy, g.ey), z);
                h[(static_cast<std::size_t>(kx) * g.ey + ky) * g.vocab + z] =
                    acc / g.window.area();
            }
    return h;
}

std::vector<double> e_step(const cg::CountingGrid& g, const cg::LocationPrior& prior,
                           const cg::Bag& bag) {
    const std::vector<double> h = oracle::window_histograms(g);
    std::vector<double> scores(static_cast<std::size_t>(g.cells()));
    for (int k = 0; k < g.cells(); ++k) {
        double s = prior.log_p[static_cast<std::size_t>(k)];
        for (int z = 0; z < g.vocab; ++z) {
            const double c = bag.counts[static_cast<std::size_t>(z)];
            if (c == 0.0) continue;
            s += c * std::log(h[static_cast<std::size_t>(k) * g.vocab + z]);
        }
        scores[static_cast<std::size_t>(k)] = s;
    }
    const double norm = lse(scores);
    std::vector<double> q(scores.size());
    for (std::size_t k = 0; k < q.size(); ++k) q[k] = std::exp(scores[k] - norm);
    return q;
}

cg::CountingGrid m_step(const cg::CountingGrid& g, std::span<const cg::Bag> corpus,
                        std::span<const cg::LocationPosterior> posteriors,
                        const cg::TrainConfig& cfg) {
    const std::vector<double> h = oracle::window_histograms(g);
    cg::CountingGrid out = g;
    for (int ix = 0; ix < g.ex; ++ix) {
        for (int iy = 0; iy < g.ey; ++iy) {
            const int i = ix * g.ey + iy;
            double row_total = 0.0;
            for (int z = 0; z < g.vocab; ++z) {
                double sum = 0.0;
                for (std::size_t t = 0; t < corpus.size(); ++t) {
                    const double c = corpus[t].counts[static_cast<std::size_t>(z)];
                    if (c == 0.0) continue;
                    double inner = 0.0;
                    for (int kx = 0; kx < g.ex; ++kx)
                        for (int ky = 0; ky < g.ey; ++ky) {
                            if (wrap(ix - kx, g.ex) >= g.window.wx ||
                                wrap(iy - ky, g.ey) >= g.window.wy)
                                continue;  // i not inside the window at k
                            const int k = kx * g.ey + ky;
                            const double q =
                                std::exp(posteriors[t].log_q[static_cast<std::size_t>(k)]);
                            if (q == 0.0) continue;
                            inner += q / h[static_cast<std::size_t>(k) * g.vocab + z];
                        }
                    sum += c * inner;
                }
                const double v = cfg.eta_for(z) + g.pi_at(i, z) * sum;
                out.pi[static_cast<std::size_t>(i) * g.vocab + z] = v;
                row_total += v;
            }
            for (int z = 0; z < g.vocab; ++z) {
                if (row_total > 0.0)
                    out.pi[static_cast<std::size_t>(i) * g.vocab + z] /= row_total;
                else
                    out.pi[static_cast<std::size_t>(i) * g.vocab + z] = g.pi_at(i, z);
            }
        }
    }
    return out;
}

std::vector<double> prior_smoothed(std::span<const cg::LocationPosterior> posteriors,
                                   cg::WindowSpec w) {
    const int ex = posteriors[0].ex, ey = posteriors[0].ey;
    std::vector<double> mass(static_cast<std::size_t>(ex) * ey, 0.0);
    for (int kx = 0; kx < ex; ++kx)
        for (int ky = 0; ky < ey; ++ky)
            for (const cg::LocationPosterior& post : posteriors)
                for (int ix = 0; ix < ex; ++ix)
                    for (int iy = 0; iy < ey; ++iy) {
                        // mask m[(k - i) mod E], ones in the upper-left W block
                        if (wrap(kx - ix, ex) < w.wx && wrap(ky - iy, ey) < w.wy)
                            mass[static_cast<std::size_t>(kx) * ey + ky] +=
                                std::exp(post.log_q[static_cast<std::size_t>(ix) * ey + iy]);
                    }
    double total = 0.0;
    for (double v : mass) total += v;
    for (double& v : mass) v /= total;
    return mass;
}

double mixture_loglik(const cg::CountingGrid& g, const cg::LocationPrior& prior,
                      const cg::Bag& bag) {
    const std::vector<double> h = oracle::window_histograms(g);
    std::vector<double> scores(static_cast<std::size_t>(g.cells()));
    for (int k = 0; k < g.cells(); ++k) {
        double s = prior.log_p[static_cast<std::size_t>(k)];
        for (int z = 0; z < g.vocab; ++z) {
            const double c = bag.counts[static_cast<std::size_t>(z)];
            if (c == 0.0) continue;
            s += c * std::log(h[static_cast<std::size_t>(k) * g.vocab + z]);
        }
        scores[static_cast<std::size_t>(k)] = s;
    }
    return lse(scores);
}

std::vector<double> e_step_tessellated(const cg::CountingGrid& g, const cg::LocationPrior& prior,
                                       const cg::SectionedBag& sb) {
    const int bx = g.window.wx / sb.tess.sx, by = g.window.wy / sb.tess.sy;
    std::vector<double> scores(static_cast<std::size_t>(g.cells()));
    for (int kx = 0; kx < g.ex; ++kx) {
        for (int ky = 0; ky < g.ey; ++ky) {
            double s = prior.log_p[static_cast<std::size_t>(kx) * g.ey + ky];
            for (int sx = 0; sx < sb.tess.sx; ++sx)
                for (int sy = 0; sy < sb.tess.sy; ++sy)
                    for (int z = 0; z < g.vocab; ++z) {
                        const double c = sb.at(sx, sy, z);
                        if (c == 0.0) continue;
                        double acc = 0.0;
                        for (int ix = 0; ix < bx; ++ix)
                            for (int iy = 0; iy < by; ++iy)
                                acc += g.pi_at(wrap(kx + sx * bx + ix, g.ex) * g.ey +
                                                   wrap(ky + sy * by + iy, g.ey),
                                               z);
                        s += c * std::log(acc / (bx * by));
                    }
            scores[static_cast<std::size_t>(kx) * g.ey + ky] = s;
        }
    }
    const double norm = lse(scores);
    std::vector<double> q(scores.size());
    for (std::size_t k = 0; k < q.size(); ++k) q[k] = std::exp(scores[k] - norm);
    return q;
}

cg::CountingGrid m_step_tessellated(const cg::CountingGrid& g,
                                    std::span<const cg::SectionedBag> corpus,
                                    std::span<const cg::LocationPosterior> posteriors,
                                    const cg::TrainConfig& cfg) {
    const cg::TessellationSpec tess = corpus[0].tess;
    const int bx = g.window.wx / tess.sx, by = g.window.wy / tess.sy;

    // h^s[k,z] per sector
    std::vector<std::vector<double>> hs(static_cast<std::size_t>(tess.sectors()),
                                        std::vector<double>(static_cast<std::size_t>(g.cells()) * g.vocab));
    for (int sx = 0; sx < tess.sx; ++sx)
        for (int sy = 0; sy < tess.sy; ++sy)
            for (int kx = 0; kx < g.ex; ++kx)
                for (int ky = 0; ky < g.ey; ++ky)
                    for (int z = 0; z < g.vocab; ++z) {
                        double acc = 0.0;
                        for (int ix = 0; ix < bx; ++ix)
                            for (int iy = 0; iy < by; ++iy)
                                acc += g.pi_at(wrap(kx + sx * bx + ix, g.ex) * g.ey +
                                                   wrap(ky + sy * by + iy, g.ey),
                                               z);
                        hs[static_cast<std::size_t>(sx * tess.sy + sy)]
                          [(static_cast<std::size_t>(kx) * g.ey + ky) * g.vocab + z] =
                              acc / (bx * by);
                    }

    cg::CountingGrid out = g;
    for (int ix = 0; ix < g.ex; ++ix) {
        for (int iy = 0; iy < g.ey; ++iy) {
            const int i = ix * g.ey + iy;
            double row_total = 0.0;
            for (int z = 0; z < g.vocab; ++z) {
                double sum = 0.0;
                for (std::size_t t = 0; t < corpus.size(); ++t) {
                    for (int sx = 0; sx < tess.sx; ++sx)
                        for (int sy = 0; sy < tess.sy; ++sy) {
                            const double c = corpus[t].at(sx, sy, z);
                            if (c == 0.0) continue;
                            double inner = 0.0;
                            for (int kx = 0; kx < g.ex; ++kx)
                                for (int ky = 0; ky < g.ey; ++ky) {
                                    // i inside sub-window s of the window at k?
                                    if (wrap(ix - kx - sx * bx, g.ex) >= bx ||
                                        wrap(iy - ky - sy * by, g.ey) >= by)
                                        continue;
                                    const int k = kx * g.ey + ky;
                                    const double q = std::exp(
                                        posteriors[t].log_q[static_cast<std::size_t>(k)]);
                                    if (q == 0.0) continue;
                                    inner += q / hs[static_cast<std::size_t>(sx * tess.sy + sy)]
                                                   [static_cast<std::size_t>(k) * g.vocab + z];
                                }
                            sum += c * inner;
                        }
                }
                const double v = cfg.eta_for(z) + g.pi_at(i, z) * sum;
                out.pi[static_cast<std::size_t>(i) * g.vocab + z] = v;
                row_total += v;
            }
            for (int z = 0; z < g.vocab; ++z) {
                if (row_total > 0.0)
                    out.pi[static_cast<std::size_t>(i) * g.vocab + z] /= row_total;
                else
                    out.pi[static_cast<std::size_t>(i) * g.vocab + z] = g.pi_at(i, z);
            }
        }
    }
    return out;
}

std::vector<double> e_step_epitome(const cg::CountingGrid& g, const cg::LocationPrior& prior,
                                   const cg::FeatureMap& fm) {
    std::vector<double> scores(static_cast<std::size_t>(g.cells()));
    for (int kx = 0; kx < g.ex; ++kx) {
        for (int ky = 0; ky < g.ey; ++ky) {
            double s = prior.log_p[static_cast<std::size_t>(kx) * g.ey + ky];
            for (int sx = 0; sx < fm.nx; ++sx)
                for (int sy = 0; sy < fm.ny; ++sy)
                    s += std::log(g.pi_at(wrap(kx + sx, g.ex) * g.ey + wrap(ky + sy, g.ey),
                                          fm.at(sx, sy)));
            scores[static_cast<std::size_t>(kx) * g.ey + ky] = s;
        }
    }
    const double norm = lse(scores);
    std::vector<double> q(scores.size());
    for (std::size_t k = 0; k < q.size(); ++k) q[k] = std::exp(scores[k] - norm);
    return q;
}

cg::CountingGrid m_step_epitome(int ex, int ey, int vocab, cg::WindowSpec w,
                                std::span<const cg::FeatureMap> corpus,
                                std::span<const cg::LocationPosterior> posteriors,
                                const cg::TrainConfig& cfg) {
    cg::CountingGrid out{ex, ey, vocab, w, {}};
    out.pi.assign(static_cast<std::size_t>(ex) * ey * vocab, 0.0);
    for (int ix = 0; ix < ex; ++ix) {
        for (int iy = 0; iy < ey; ++iy) {
            const int i = ix * ey + iy;
            double row_total = 0.0;
            for (int z = 0; z < vocab; ++z) {
                double v = cfg.eta_for(z);
                for (std::size_t t = 0; t < corpus.size(); ++t) {
                    const cg::FeatureMap& fm = corpus[t];
                    for (int kx = 0; kx < ex; ++kx)
                        for (int ky = 0; ky < ey; ++ky) {
                            const int sx = wrap(ix - kx, ex), sy = wrap(iy - ky, ey);
                            if (sx >= fm.nx || sy >= fm.ny) continue;  // offset outside the map
                            if (fm.at(sx, sy) != z) continue;
                            v += std::exp(
                                posteriors[t].log_q[static_cast<std::size_t>(kx) * ey + ky]);
                        }
                }
                out.pi[static_cast<std::size_t>(i) * vocab + z] = v;
                row_total += v;
            }
            for (int z = 0; z < vocab; ++z) {
                if (row_total > 0.0)
                    out.pi[static_cast<std::size_t>(i) * vocab + z] /= row_total;
                else
                    out.pi[static_cast<std::size_t>(i) * vocab + z] = 1.0 / vocab;
            }
        }
    }
    return out;
}

MouResult mixture_of_unigrams_em(const std::vector<double>& theta0, int components, int vocab,
                                 std::span<const cg::Bag> corpus, double eta, double tol,
                                 int max_iters) {
    MouResult res;
    res.theta = theta0;
    res.log_prior.assign(static_cast<std::size_t>(components),
                         -std::log(static_cast<double>(components)));
    const int T = static_cast<int>(corpus.size());
    std::vector<double> q(static_cast<std::size_t>(T) * components);

    auto e_pass = [&]() {
        for (int t = 0; t < T; ++t) {
            std::vector<double> scores(static_cast<std::size_t>(components));
            for (int k = 0; k < components; ++k) {
                double s = res.log_prior[static_cast<std::size_t>(k)];
                for (int z = 0; z < vocab; ++z) {
                    const double c = corpus[static_cast<std::size_t>(t)].counts[static_cast<std::size_t>(z)];
                    if (c == 0.0) continue;
                    s += c * std::log(res.theta[static_cast<std::size_t>(k) * vocab + z]);
                }
                scores[static_cast<std::size_t>(k)] = s;
            }
            const double norm = lse(scores);
            for (int k = 0; k < components; ++k)
                q[static_cast<std::size_t>(t) * components + k] =
                    std::exp(scores[static_cast<std::size_t>(k)] - norm);
        }
    };
    auto bound_pass = [&]() {
        double b = 0.0;
        for (int t = 0; t < T; ++t)
            for (int k = 0; k < components; ++k) {
                const double qv = q[static_cast<std::size_t>(t) * components + k];
                if (qv <= 0.0) continue;
                double s = res.log_prior[static_cast<std::size_t>(k)];
                for (int z = 0; z < vocab; ++z) {
                    const double c = corpus[static_cast<std::size_t>(t)].counts[static_cast<std::size_t>(z)];
                    if (c == 0.0) continue;
                    s += c * std::log(res.theta[static_cast<std::size_t>(k) * vocab + z]);
                }
                b += qv * (s - std::log(qv));
            }
        return b;
    };

    double prev = 0.0;
    bool have_prev = false;
    for (int iter = 1; iter <= max_iters; ++iter) {
        e_pass();
        // M: theta ~ eta + sum_t q c ; prior ~ counts
        for (int k = 0; k < components; ++k) {
            double row = 0.0;
            for (int z = 0; z < vocab; ++z) {
                double v = eta;
                for (int t = 0; t < T; ++t)
                    v += q[static_cast<std::size_t>(t) * components + k] *
                         corpus[static_cast<std::size_t>(t)].counts[static_cast<std::size_t>(z)];
                res.theta[static_cast<std::size_t>(k) * vocab + z] = v;
                row += v;
            }
            for (int z = 0; z < vocab; ++z) res.theta[static_cast<std::size_t>(k) * vocab + z] /= row;
        }
        for (int k = 0; k < components; ++k) {
            double mass = 0.0;
            for (int t = 0; t < T; ++t) mass += q[static_cast<std::size_t>(t) * components + k];
            res.log_prior[static_cast<std::size_t>(k)] = std::log(mass / T);
        }
        const double b = bound_pass();
        res.bound_trace.push_back(b);
        if (have_prev && std::abs(b - prev) / (1.0 + std::abs(prev)) <= tol) break;
        prev = b;
        have_prev = true;
    }
    e_pass();
    res.bound_trace.push_back(bound_pass());
    return res;
}

double max_rel_err(std::span<const double> got, std::span<const double> want, double floor) {
    if (got.size() != want.size()) throw std::runtime_error("max_rel_err: size mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double denom = std::max(std::abs(want[i]), floor);
        worst = std::max(worst, std::abs(got[i] - want[i]) / denom);
    }
    return worst;
}

}  // namespace oracle
