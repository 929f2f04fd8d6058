#pragma once

/**
 * @file optproj.hpp
 * @brief Search for probe and idler projector settings (QWP angle, polarizer
 *        angle, extinction) that spread the sample responses apart, and
 *        nearest feasible realization of a target Mueller matrix.
 */

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ghostpol/countsim.hpp"
#include "ghostpol/discern.hpp"
#include "ghostpol/ghost.hpp"

namespace ghostpol::optproj {

using polcalc::PolElement;

enum class ElementOrder { qwp_then_lp, lp_then_qwp };

/// QWP + (partial) linear polarizer realization of a projector.
struct ProjectorParam {
    double qwp_deg = 0.0;
    double lp_deg = 0.0;
    double extinction = std::numeric_limits<double>::infinity();  ///< inf = ideal
    ElementOrder order = ElementOrder::qwp_then_lp;

    /// Elements in traversal order.
    ghost::Elements elements() const {
        const PolElement q = PolElement::qwp(qwp_deg);
        const PolElement p = PolElement::linear_polarizer(extinction, lp_deg);
        return order == ElementOrder::qwp_then_lp ? ghost::Elements{q, p} : ghost::Elements{p, q};
    }

    JonesMatrix jones() const { return polcalc::compose(elements()); }

    void validate() const {
        if (!std::isfinite(qwp_deg) || !std::isfinite(lp_deg)) throw DomainError("projector angles must be finite");
        if (!(extinction >= 1.0)) throw DomainError("projector extinction must be >= 1");
    }

    ProjectorParam normalized() const {
        ProjectorParam p = *this;
        p.qwp_deg = wrap_180(qwp_deg);
        p.lp_deg = wrap_180(lp_deg);
        return p;
    }

    friend bool operator==(const ProjectorParam&, const ProjectorParam&) = default;
};

/// Projector settings from the reference experiment: probe and three idler
/// projectors (QWP angle, LP angle).
inline ProjectorParam reference_probe(double extinction = std::numeric_limits<double>::infinity()) {
    return {62.0, 90.0, extinction};
}
inline std::vector<ProjectorParam> reference_projectors(std::size_t n = 3) {
    std::vector<ProjectorParam> all{{170.0, 7.5}, {18.0, 110.0}, {45.0, 34.0}};
    if (n > all.size()) throw DomainError("only three reference projectors exist");
    all.resize(n);
    return all;
}

// ---------------------------------------------------------------------------
// Nelder-Mead

struct NelderMeadOptions {
    int max_evaluations = 2000;
    double f_tol = 1e-12;
    double x_tol = 1e-9;
    double initial_step = 10.0;
};

struct NelderMeadResult {
    std::vector<double> x;
    double f = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Minimizes f from x0 with the standard reflection/expansion/contraction/
/// shrink coefficients (1, 2, 0.5, 0.5).
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, const NelderMeadOptions& opt = {},
                                    std::vector<double> steps = {}) {
    const std::size_t n = x0.size();
    if (steps.empty()) steps.assign(n, opt.initial_step);
    NelderMeadResult res;
    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        return f(x);
    };
    if (n == 0) {
        res.x = x0;
        res.f = eval(x0);
        res.converged = true;
        return res;
    }

    std::vector<std::vector<double>> s(n + 1, x0);
    std::vector<double> fs(n + 1);
    for (std::size_t i = 0; i < n; ++i) s[i + 1][i] += steps[i];
    for (std::size_t i = 0; i <= n; ++i) fs[i] = eval(s[i]);

    std::vector<std::size_t> idx(n + 1);
    auto point = [n](const std::vector<double>& c, const std::vector<double>& w, double t) {
        std::vector<double> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = c[i] + t * (w[i] - c[i]);
        return p;
    };

    while (res.evaluations < opt.max_evaluations) {
        for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return fs[a] < fs[b]; });
        const std::size_t best = idx[0], worst = idx[n], second = idx[n - 1];

        double size = 0.0;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t k = 0; k < n; ++k) size = std::max(size, std::abs(s[i][k] - s[best][k]));
        if (std::abs(fs[worst] - fs[best]) <= opt.f_tol && size <= opt.x_tol) {
            res.converged = true;
            break;
        }
        if (size <= opt.x_tol * 1e-3) {
            res.converged = true;
            break;
        }

        std::vector<double> c(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i)
            if (i != worst)
                for (std::size_t k = 0; k < n; ++k) c[k] += s[i][k] / static_cast<double>(n);

        const auto xr = point(c, s[worst], -1.0);
        const double fr = eval(xr);
        if (fr < fs[best]) {
            const auto xe = point(c, s[worst], -2.0);
            const double fe = eval(xe);
            if (fe < fr) {
                s[worst] = xe;
                fs[worst] = fe;
            } else {
                s[worst] = xr;
                fs[worst] = fr;
            }
        } else if (fr < fs[second]) {
            s[worst] = xr;
            fs[worst] = fr;
        } else {
            const bool outside = fr < fs[worst];
            const auto xc = outside ? point(c, xr, 0.5) : point(c, s[worst], 0.5);
            const double fc = eval(xc);
            if (fc < (outside ? fr : fs[worst])) {
                s[worst] = xc;
                fs[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    s[i] = point(s[best], s[i], 0.5);
                    fs[i] = eval(s[i]);
                }
            }
        }
    }
    std::size_t b = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fs[i] < fs[b]) b = i;
    res.x = s[b];
    res.f = fs[b];
    return res;
}

// ---------------------------------------------------------------------------
// Objective

enum class ObjectiveKind { min_distance, mean_distance, min_ci_normalized };
enum class SearchMode { joint, sequential };

struct OptimizationConfig {
    std::vector<ghost::SampleFamily> families{ghost::SampleFamily::lp(), ghost::SampleFamily::qwp()};
    std::vector<double> theta_grid = ghost::angle_grid(1.0);
    qstate::TwoQubitDensity rho0 = qstate::bell_psi_plus();
    std::size_t dimension = 3;

    ProjectorParam probe = reference_probe();
    std::vector<ProjectorParam> projectors = reference_projectors(3);

    /// Names of the parameters the search may move, e.g. "probe.qwp",
    /// "probe.lp", "probe.extinction", "projector2.lp". Empty = every angle.
    std::vector<std::string> free_parameters;

    ObjectiveKind objective = ObjectiveKind::min_distance;
    SearchMode mode = SearchMode::joint;
    /// Used by min_ci_normalized only.
    countsim::CountModel count_model{};
    std::size_t n_runs = 8;

    std::size_t restarts = 16;
    int max_evaluations = 8000;  ///< total over all restarts (and stages)
    std::uint64_t seed = 1;

    void validate() const {
        if (restarts < 1) throw DomainError("optimization needs at least one restart");
        if (dimension != 2 && dimension != 3) throw DomainError("response dimension must be 2 or 3");
        if (projectors.size() != dimension) throw DomainError("number of projectors must equal the dimension");
        if (theta_grid.size() * families.size() < 2) throw DomainError("objective needs at least 2 samples");
        if (families.empty()) throw DomainError("no sample families configured");
        probe.validate();
        for (const auto& p : projectors) p.validate();
    }
};

/// Precomputed sample operators for one configuration.
class ResponseModel {
public:
    explicit ResponseModel(const OptimizationConfig& cfg) : cfg_(cfg) {
        for (const auto& fam : cfg.families)
            for (double t : cfg.theta_grid) samples_.push_back(ghost::sample_kraus(fam, t));
        if (samples_.size() < 2) throw DomainError("objective needs at least 2 samples");
    }

    std::size_t size() const { return samples_.size(); }

    /// Raw joint probabilities, one row per sample.
    Eigen::MatrixXd raw(const ProjectorParam& probe, const std::vector<ProjectorParam>& projectors) const {
        const JonesMatrix pp = probe.jones();
        std::vector<JonesMatrix> proj;
        for (const auto& p : projectors) proj.push_back(p.jones());
        Eigen::MatrixXd out(static_cast<Eigen::Index>(samples_.size()), static_cast<Eigen::Index>(proj.size()));
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            ghost::ProbeTransform t;
            for (const auto& k : samples_[i]) t.kraus.push_back(pp * k);
            for (std::size_t n = 0; n < proj.size(); ++n)
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)) =
                    ghost::coincidence_probability(cfg_.rho0, t, proj[n]).joint;
        }
        return out;
    }

private:
    const OptimizationConfig& cfg_;
    std::vector<std::vector<JonesMatrix>> samples_;
};

/// Objective on a raw response matrix (rows = samples), after dataset-level
/// normalization. A dataset without any positive value scores 0.
inline double objective_from_raw(const Eigen::MatrixXd& raw, const OptimizationConfig& cfg) {
    const Eigen::Index n = raw.rows();
    if (n < 2) throw DomainError("objective needs at least 2 samples");
    const double scale = raw.maxCoeff();
    if (!(scale > 1e-300)) return 0.0;
    const Eigen::MatrixXd pts = raw / scale;

    Eigen::MatrixXd half;
    if (cfg.objective == ObjectiveKind::min_ci_normalized) {
        // Expected Poisson spread of each coordinate over n_runs repetitions.
        const auto& m = cfg.count_model;
        const double gain = m.pair_rate * m.integration_time * m.eff_signal * m.eff_idler;
        if (!(gain > 0.0)) throw DomainError("min_ci_normalized needs a positive detected pair rate");
        const double t = discern::student_t95(cfg.n_runs - 1) / std::sqrt(static_cast<double>(cfg.n_runs));
        half = ((raw.array() * gain + m.accidental_mean()).sqrt() / (gain * scale) * t)
                   .cwiseMax(discern::kSemiAxisFloor);
    }

    double best = std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const Eigen::VectorXd d = (pts.row(j) - pts.row(i)).transpose();
            const double dist = d.norm();
            double v = dist;
            if (cfg.objective == ObjectiveKind::min_ci_normalized) {
                if (dist > 0.0) {
                    const Eigen::VectorXd u = d / dist;
                    auto h = [&](Eigen::Index r) {
                        return std::sqrt((half.row(r).transpose().cwiseAbs2().array() * u.cwiseAbs2().array()).sum());
                    };
                    v = dist / (h(i) + h(j));
                }
            }
            best = std::min(best, v);
            sum += v;
        }
    if (cfg.objective == ObjectiveKind::mean_distance)
        return sum / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
    return best;
}

/// Minimum pairwise distance (or the configured alternative) between the
/// normalized responses of every configured sample; larger is better.
inline double objective_min_separation(const ProjectorParam& probe, const std::vector<ProjectorParam>& projectors,
                                       const OptimizationConfig& cfg) {
    const ResponseModel model(cfg);
    return objective_from_raw(model.raw(probe, projectors), cfg);
}

// ---------------------------------------------------------------------------
// Parameter vector <-> settings

struct ParamSlot {
    std::string name;
    enum class Kind { angle, extinction } kind;
    int target;  ///< -1 = probe, k = projector k
    enum class Field { qwp, lp, extinction } field;
};

inline std::vector<ParamSlot> all_slots(std::size_t n_projectors) {
    using K = ParamSlot::Kind;
    using F = ParamSlot::Field;
    std::vector<ParamSlot> s{{"probe.qwp", K::angle, -1, F::qwp},
                             {"probe.lp", K::angle, -1, F::lp},
                             {"probe.extinction", K::extinction, -1, F::extinction}};
    for (std::size_t k = 0; k < n_projectors; ++k) {
        const std::string p = "projector" + std::to_string(k + 1);
        const int t = static_cast<int>(k);
        s.push_back({p + ".qwp", K::angle, t, F::qwp});
        s.push_back({p + ".lp", K::angle, t, F::lp});
        s.push_back({p + ".extinction", K::extinction, t, F::extinction});
    }
    return s;
}

inline std::vector<ParamSlot> free_slots(const OptimizationConfig& cfg) {
    const auto all = all_slots(cfg.projectors.size());
    std::vector<ParamSlot> out;
    if (cfg.free_parameters.empty()) {
        for (const auto& s : all)
            if (s.kind == ParamSlot::Kind::angle) out.push_back(s);
        return out;
    }
    for (const auto& name : cfg.free_parameters) {
        auto it = std::find_if(all.begin(), all.end(), [&](const ParamSlot& s) { return s.name == name; });
        if (it == all.end()) throw DomainError("unknown free parameter '" + name + "'");
        out.push_back(*it);
    }
    return out;
}

/// Block amplitude 1/sqrt(extinction) folded into [0, 1].
inline double fold_unit(double u) {
    double t = std::fmod(std::abs(u), 2.0);
    return t > 1.0 ? 2.0 - t : t;
}

inline double extinction_from_amplitude(double t, double ideal_snap = 1e-6) {
    return t <= ideal_snap ? std::numeric_limits<double>::infinity() : std::max(1.0, 1.0 / (t * t));
}

inline double amplitude_from_extinction(double k) { return std::isinf(k) ? 0.0 : 1.0 / std::sqrt(k); }

struct Settings {
    ProjectorParam probe;
    std::vector<ProjectorParam> projectors;
};

inline ProjectorParam& slot_target(Settings& s, const ParamSlot& slot) {
    return slot.target < 0 ? s.probe : s.projectors[static_cast<std::size_t>(slot.target)];
}

inline void apply(Settings& s, const std::vector<ParamSlot>& slots, const std::vector<double>& x) {
    for (std::size_t i = 0; i < slots.size(); ++i) {
        ProjectorParam& p = slot_target(s, slots[i]);
        switch (slots[i].field) {
            case ParamSlot::Field::qwp: p.qwp_deg = wrap_180(x[i]); break;
            case ParamSlot::Field::lp: p.lp_deg = wrap_180(x[i]); break;
            case ParamSlot::Field::extinction: p.extinction = extinction_from_amplitude(fold_unit(x[i]), 0.0); break;
        }
    }
}

inline std::vector<double> extract(const Settings& s, const std::vector<ParamSlot>& slots) {
    std::vector<double> x;
    for (const auto& slot : slots) {
        const ProjectorParam& p = slot.target < 0 ? s.probe : s.projectors[static_cast<std::size_t>(slot.target)];
        switch (slot.field) {
            case ParamSlot::Field::qwp: x.push_back(p.qwp_deg); break;
            case ParamSlot::Field::lp: x.push_back(p.lp_deg); break;
            case ParamSlot::Field::extinction: x.push_back(amplitude_from_extinction(p.extinction)); break;
        }
    }
    return x;
}

// ---------------------------------------------------------------------------
// Multi-start search

struct TraceEntry {
    std::size_t stage = 0;
    std::size_t restart = 0;
    int evaluation = 0;  ///< global evaluation index
    double value = 0.0;
    double best = 0.0;
};

struct OptimizationResult {
    Settings best;
    double value = 0.0;
    bool converged = false;
    int evaluations = 0;
    std::vector<TraceEntry> trace;
};

/// Latin-hypercube style start points: restart 0 is `x0`, the others place
/// each coordinate in its own stratum of the range with a random offset.
inline std::vector<std::vector<double>> start_points(const std::vector<ParamSlot>& slots,
                                                     const std::vector<double>& x0, std::size_t restarts,
                                                     std::uint64_t seed) {
    std::vector<std::vector<double>> pts{x0};
    if (restarts <= 1) return pts;
    const std::size_t m = restarts - 1;
    std::vector<std::vector<double>> cols(slots.size());
    for (std::size_t d = 0; d < slots.size(); ++d) {
        countsim::Engine g(countsim::stream_seed(seed, {0x5354415254ULL, d}));
        std::vector<std::size_t> perm(m);
        for (std::size_t i = 0; i < m; ++i) perm[i] = i;
        for (std::size_t i = m; i > 1; --i) std::swap(perm[i - 1], perm[g() % i]);
        const double range = slots[d].kind == ParamSlot::Kind::angle ? 180.0 : 1.0;
        for (std::size_t i = 0; i < m; ++i)
            cols[d].push_back(range * (static_cast<double>(perm[i]) + countsim::uniform01(g)) / static_cast<double>(m));
    }
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> p(slots.size());
        for (std::size_t d = 0; d < slots.size(); ++d) p[d] = cols[d][i];
        pts.push_back(std::move(p));
    }
    return pts;
}

namespace detail {

inline void run_stage(const OptimizationConfig& cfg, const ResponseModel& model, const std::vector<ParamSlot>& slots,
                      int budget, std::size_t stage, OptimizationResult& res) {
    if (slots.empty()) return;
    const std::vector<double> x0 = extract(res.best, slots);
    const auto starts = start_points(slots, x0, cfg.restarts,
                                     countsim::stream_seed(cfg.seed, {stage}));
    const int per_restart = std::max(1, budget / static_cast<int>(starts.size()));
    bool all_converged = true;

    for (std::size_t r = 0; r < starts.size(); ++r) {
        Settings trial = res.best;
        auto f = [&](const std::vector<double>& x) {
            apply(trial, slots, x);
            const double v = objective_from_raw(model.raw(trial.probe, trial.projectors), cfg);
            ++res.evaluations;
            if (v > res.value) {
                res.value = v;
                res.best = trial;
            }
            res.trace.push_back({stage, r, res.evaluations, v, res.value});
            return -v;
        };
        std::vector<double> steps;
        for (const auto& s : slots) steps.push_back(s.kind == ParamSlot::Kind::angle ? 10.0 : 0.2);
        NelderMeadOptions opt;
        opt.max_evaluations = per_restart;
        opt.x_tol = 1e-6;
        opt.f_tol = 1e-12;
        const auto nm = nelder_mead(f, starts[r], opt, steps);
        all_converged = all_converged && nm.converged;
    }
    res.converged = res.converged && all_converged;
}

}  // namespace detail

/// Multi-start Nelder-Mead over the free parameters. Joint mode moves every
/// free parameter at once; sequential mode optimizes the probe first and
/// then each projector in turn. The returned value is never below the value
/// of the configured start point.
inline OptimizationResult optimize(const OptimizationConfig& cfg) {
    cfg.validate();
    const ResponseModel model(cfg);
    OptimizationResult res;
    res.best = {cfg.probe, cfg.projectors};
    res.value = objective_from_raw(model.raw(cfg.probe, cfg.projectors), cfg);
    res.evaluations = 1;
    res.converged = true;
    res.trace.push_back({0, 0, 1, res.value, res.value});

    const auto slots = free_slots(cfg);
    if (cfg.mode == SearchMode::joint) {
        detail::run_stage(cfg, model, slots, cfg.max_evaluations - 1, 0, res);
    } else {
        std::vector<std::vector<ParamSlot>> groups(cfg.projectors.size() + 1);
        for (const auto& s : slots) groups[static_cast<std::size_t>(s.target + 1)].push_back(s);
        std::size_t active = 0;
        for (const auto& g : groups) active += g.empty() ? 0 : 1;
        const int budget = (cfg.max_evaluations - 1) / static_cast<int>(std::max<std::size_t>(1, active));
        for (std::size_t g = 0; g < groups.size(); ++g) detail::run_stage(cfg, model, groups[g], budget, g, res);
    }
    res.best.probe = res.best.probe.normalized();
    for (auto& p : res.best.projectors) p = p.normalized();
    return res;
}

// ---------------------------------------------------------------------------
// Nearest feasible realization

struct FeasibleOptions {
    ElementOrder order = ElementOrder::qwp_then_lp;
    polcalc::StokesFrame frame = polcalc::StokesFrame::horizontal_reference;
    bool fit_extinction = true;
    double grid_step_deg = 5.0;
};

struct FeasibleResult {
    ProjectorParam param;
    double distance = 0.0;
};

inline MuellerMatrix feasible_mueller(const ProjectorParam& p, polcalc::StokesFrame frame) {
    return polcalc::in_frame(polcalc::jones_to_mueller(p.jones()), frame);
}

/// Closest QWP + polarizer realization of `target` in Frobenius norm: coarse
/// grid over both angles (and the block amplitude), then Nelder-Mead from the
/// best grid points.
inline FeasibleResult nearest_feasible(const MuellerMatrix& target, const FeasibleOptions& opt = {}) {
    auto make = [&](const std::vector<double>& x) {
        ProjectorParam p;
        p.order = opt.order;
        p.qwp_deg = wrap_180(x[0]);
        p.lp_deg = wrap_180(x[1]);
        p.extinction = opt.fit_extinction ? extinction_from_amplitude(fold_unit(x[2]), 0.0)
                                          : std::numeric_limits<double>::infinity();
        return p;
    };
    auto dist2 = [&](const std::vector<double>& x) {
        return (feasible_mueller(make(x), opt.frame) - target).squaredNorm();
    };

    struct Seed {
        double d;
        std::vector<double> x;
    };
    std::vector<Seed> seeds;
    const std::vector<double> amps = opt.fit_extinction ? std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}
                                                        : std::vector<double>{0.0};
    for (double a = 0.0; a < 180.0; a += opt.grid_step_deg)
        for (double b = 0.0; b < 180.0; b += opt.grid_step_deg)
            for (double t : amps) {
                std::vector<double> x{a, b};
                if (opt.fit_extinction) x.push_back(t);
                seeds.push_back({dist2(x), x});
            }
    std::stable_sort(seeds.begin(), seeds.end(), [](const Seed& l, const Seed& r) { return l.d < r.d; });

    NelderMeadOptions nm;
    nm.max_evaluations = 4000;
    nm.x_tol = 1e-10;
    nm.f_tol = 1e-20;
    std::vector<double> steps{opt.grid_step_deg, opt.grid_step_deg};
    if (opt.fit_extinction) steps.push_back(0.1);

    std::vector<double> best_x = seeds.front().x;
    double best_d = seeds.front().d;
    const std::size_t n_refine = std::min<std::size_t>(8, seeds.size());
    for (std::size_t i = 0; i < n_refine; ++i) {
        auto r = nelder_mead(dist2, seeds[i].x, nm, steps);
        r = nelder_mead(dist2, r.x, nm, std::vector<double>(steps.size(), 0.01));
        if (r.f < best_d) {
            best_d = r.f;
            best_x = r.x;
        }
    }
    FeasibleResult out;
    out.param = make(best_x);
    if (opt.fit_extinction) out.param.extinction = extinction_from_amplitude(fold_unit(best_x[2]));
    out.distance = (feasible_mueller(out.param, opt.frame) - target).norm();
    return out;
}

}  // namespace ghostpol::optproj
