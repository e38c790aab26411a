#include "diffpurify/guidance.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace diffpurify {

namespace {

constexpr double kTieTolerance = 1e-12;

// sign with the guidance tie rule: coordinates within kTieTolerance of an
// exact match contribute nothing.
State guidance_sign(const State& d) {
    State out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        out[i] = d[i] >= kTieTolerance ? 1.0 : (d[i] <= -kTieTolerance ? -1.0 : 0.0);
    return out;
}

State distance_gradient(const State& x_hat_side, const State& y_side, DistanceNorm norm) {
    State d = x_hat_side - y_side;
    if (norm == DistanceNorm::L1) return guidance_sign(d);
    for (auto& v : d) v *= 2.0;
    return d;
}

// Pull a cotangent at x_hat back to x_t through d x_hat / d x_t.
State pullback(const ScoreModel& model, const NoiseSchedule& sched, const State& x_t, int t,
               const State& v, JacobianMode mode) {
    if (mode == JacobianMode::JacobianFree) return v;
    double s = sched.at(t);
    State jv = model.score_vjp(x_t, t, v);
    double inv_rs = 1.0 / std::sqrt(s);
    State out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] + (1.0 - s) * jv[i]) * inv_rs;
    return out;
}

struct GuidanceTerms {
    State g_long;
    State g_short;
    bool has_long = false;
    bool has_short = false;
};

GuidanceTerms guidance_terms(const ScoreModel& model, const NoiseSchedule& sched, const State& x_t,
                             int t, const State& x_hat, const State& y, const State* y_measured,
                             const GuidanceConfig& cfg) {
    if (!cfg.enabled()) throw std::invalid_argument("guidance: both terms disabled");
    double s = sched.at(t);
    if (!(s > 0.0)) throw std::domain_error("guidance: sigma(t) = 0");
    double R = guided_factor(sched, t, cfg.factor_rule, cfg.factor_constant);
    double scale = -R * cfg.guidance_scale;

    GuidanceTerms terms;
    if (cfg.use_long) {
        check_same_dim(x_hat, y, "long_range_guidance");
        State v = distance_gradient(x_hat, y, cfg.norm);
        State u = pullback(model, sched, x_t, t, v, cfg.jacobian_mode);
        terms.g_long = scaled(u, scale);
        if (!all_finite(terms.g_long))
            throw std::runtime_error("guidance: non-finite long-range gradient at t=" +
                                     std::to_string(t));
        terms.has_long = true;
    }
    if (cfg.use_short) {
        State hy = y_measured ? *y_measured : cfg.op.apply(y);
        State hx = cfg.op.apply(x_hat);
        State vy = distance_gradient(hx, hy, cfg.norm);
        State v = cfg.op.vjp(x_hat, vy);
        State u = pullback(model, sched, x_t, t, v, cfg.jacobian_mode);
        terms.g_short = scaled(u, scale);
        if (!all_finite(terms.g_short))
            throw std::runtime_error("guidance: non-finite short-range gradient at t=" +
                                     std::to_string(t));
        terms.has_short = true;
    }
    return terms;
}

}  // namespace

void GuidanceConfig::validate(int T) const {
    if (enabled()) {
        if (!(T >= interval_s && interval_s > interval_e && interval_e >= 0))
            throw std::invalid_argument("guidance: interval must satisfy T >= s > e >= 0");
    }
    if (factor_rule == FactorRule::Constant && !(factor_constant > 0.0))
        throw std::invalid_argument("guidance: constant factor must be positive");
}

double guided_factor(const NoiseSchedule& sched, int t, FactorRule rule, double constant) {
    if (rule == FactorRule::Constant) return constant;
    double s = sched.at(t);
    if (!(s > 0.0)) throw std::domain_error("guided_factor: sigma(t) = 0");
    return 1.0 / (s * s);
}

State long_range_guidance(const ScoreModel& model, const NoiseSchedule& sched, const State& x_t,
                          int t, const State& y, const GuidanceConfig& cfg) {
    GuidanceConfig c = cfg;
    c.use_long = true;
    c.use_short = false;
    State x_hat = tweedie_estimate(model, sched, x_t, t);
    return guidance_terms(model, sched, x_t, t, x_hat, y, nullptr, c).g_long;
}

State short_range_guidance(const ScoreModel& model, const NoiseSchedule& sched, const State& x_t,
                           int t, const State& y, const GuidanceConfig& cfg) {
    GuidanceConfig c = cfg;
    c.use_long = false;
    c.use_short = true;
    State x_hat = tweedie_estimate(model, sched, x_t, t);
    return guidance_terms(model, sched, x_t, t, x_hat, y, nullptr, c).g_short;
}

State combined_guidance(const ScoreModel& model, const NoiseSchedule& sched, const State& x_t,
                        int t, const State& y, const GuidanceConfig& cfg) {
    State x_hat = tweedie_estimate(model, sched, x_t, t);
    auto terms = guidance_terms(model, sched, x_t, t, x_hat, y, nullptr, cfg);
    if (terms.has_long && terms.has_short) {
        State out = terms.g_long;
        axpy(1.0, terms.g_short, out);
        return out;
    }
    return terms.has_long ? terms.g_long : terms.g_short;
}

PurifyResult purify(const ScoreModel& model, const NoiseSchedule& sched, const State& y,
                    const GuidanceConfig& cfg, std::uint64_t seed) {
    return purify_probed(model, sched, y, cfg, seed, nullptr);
}

PurifyResult purify_probed(const ScoreModel& model, const NoiseSchedule& sched, const State& y,
                           const GuidanceConfig& cfg, std::uint64_t seed, const StepProbe& probe) {
    using clock = std::chrono::steady_clock;
    cfg.validate(sched.T);
    if (cfg.enabled() && y.size() != model.dim())
        throw std::invalid_argument("purify: target dimension does not match model");

    auto t_start = clock::now();
    PurifyResult result;
    result.trajectory.seed = seed;
    result.trajectory.T = sched.T;

    const bool guiding = cfg.enabled();
    State y_measured;
    if (guiding && cfg.use_short) y_measured = cfg.op.apply(y);

    RngStream rng(seed);
    State x = rng.gaussian_vec(model.dim());
    double guidance_seconds = 0.0;

    for (int t = sched.T; t >= 1; --t) {
        // One score evaluation feeds both the denoised estimate and the
        // ancestral update, with arithmetic identical to tweedie_estimate
        // and reverse_step.
        State sc = model.score(x, t);
        double s = sched.at(t);
        double rs = std::sqrt(s);
        State x_hat(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) x_hat[i] = (x[i] + (1.0 - s) * sc[i]) / rs;
        result.trajectory.states.push_back({t, x, x_hat});

        double alpha = sched.at(t) / sched.at(t - 1);
        double beta = 1.0 - alpha;
        double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
        State next(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) next[i] = (x[i] + beta * sc[i]) * inv_sqrt_alpha;
        if (t > 1) {
            double nstd = std::sqrt(beta);
            for (auto& v : next) v += nstd * rng.gaussian();
        }
        if (!all_finite(next))
            throw std::runtime_error("reverse_step: non-finite state at t=" + std::to_string(t));

        bool gated = guiding && cfg.gated(t);
        if (probe) probe(t, x, gated);

        GuidanceLogEntry entry;
        entry.t = t;
        entry.gated = gated;
        if (gated) {
            auto g_start = clock::now();
            auto terms = guidance_terms(model, sched, x, t, x_hat, y,
                                        cfg.use_short ? &y_measured : nullptr, cfg);
            if (terms.has_long) {
                entry.norm_gl = l1_norm(terms.g_long);
                axpy(1.0, terms.g_long, next);
            }
            if (terms.has_short) {
                entry.norm_gs = l1_norm(terms.g_short);
                axpy(1.0, terms.g_short, next);
            }
            ++result.guidance_evaluations;
            guidance_seconds += std::chrono::duration<double>(clock::now() - g_start).count();
            if (!all_finite(next))
                throw std::runtime_error("purify: non-finite state after guidance at t=" +
                                         std::to_string(t));
        }
        result.guidance_log.push_back(entry);
        x = std::move(next);
    }

    result.trajectory.states.push_back({0, x, x});
    result.x0 = std::move(x);
    result.wall_time_guidance_s = guidance_seconds;
    result.wall_time_total_s = std::chrono::duration<double>(clock::now() - t_start).count();
    return result;
}

void guidance_log_csv(const PurifyResult& result, const std::string& path,
                      const std::vector<double>* minabs_to_ori) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("guidance_log_csv: cannot open " + path);
    os << "t,gated,norm_gl,norm_gs,minabs_to_ori\n";
    char buf[160];
    for (std::size_t i = 0; i < result.guidance_log.size(); ++i) {
        const auto& e = result.guidance_log[i];
        if (minabs_to_ori && i < minabs_to_ori->size())
            std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g\n", e.t, e.gated ? 1 : 0,
                          e.norm_gl, e.norm_gs, (*minabs_to_ori)[i]);
        else
            std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,\n", e.t, e.gated ? 1 : 0, e.norm_gl,
                          e.norm_gs);
        os << buf;
    }
}

}  // namespace diffpurify
