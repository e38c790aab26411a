#ifndef DIFFPURIFY_GUIDANCE_HPP
#define DIFFPURIFY_GUIDANCE_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "diffpurify/operators.hpp"
#include "diffpurify/sampler.hpp"
#include "diffpurify/schedule.hpp"
#include "diffpurify/score.hpp"
#include "diffpurify/state.hpp"

namespace diffpurify {

enum class DistanceNorm { L1, L2 };
enum class FactorRule { InverseSigmaSquared, Constant };
enum class JacobianMode { ExactVjp, JacobianFree };

struct GuidanceConfig {
    bool use_long = true;
    bool use_short = true;
    DistanceNorm norm = DistanceNorm::L1;
    MeasurementOp op;  // operator behind the short-range term
    int interval_s = 0;  // guidance active for interval_e <= t <= interval_s
    int interval_e = 0;
    FactorRule factor_rule = FactorRule::InverseSigmaSquared;
    double factor_constant = 1.0;
    JacobianMode jacobian_mode = JacobianMode::ExactVjp;
    double guidance_scale = 1.0;  // optional global scale, default 1

    bool enabled() const { return use_long || use_short; }
    bool gated(int t) const { return interval_e <= t && t <= interval_s; }
    void set_default_interval(int T) {
        interval_s = T / 2;
        interval_e = T / 5;
    }
    void validate(int T) const;
};

// R_t: 1/sigma(t)^2 under the default rule, or the configured constant.
double guided_factor(const NoiseSchedule& sched, int t, FactorRule rule, double constant = 1.0);

// -R_t * pullback of the distance gradient at the denoised estimate, with the
// guidance target y (the measurement; the attacked sample in the pipeline):
//   v = sign(x_hat - y)            (L1)   or   2 (x_hat - y)   (L2)
//   exact-vjp:      u = (v + (1 - sigma) * v^T dscore/dx) / sqrt(sigma)
//   jacobian-free:  u = v          (the whole d x_hat / d x_t factor dropped)
// L1 treats |x_hat - y| < 1e-12 coordinates as exact ties (zero contribution).
State long_range_guidance(const ScoreModel& model, const NoiseSchedule& sched, const State& x_t,
                          int t, const State& y, const GuidanceConfig& cfg);

// Same structure through the measurement operator:
//   v = H^T sign(H(x_hat) - H(y))  (L1), pulled back identically.
State short_range_guidance(const ScoreModel& model, const NoiseSchedule& sched, const State& x_t,
                           int t, const State& y, const GuidanceConfig& cfg);

// Sum of the enabled terms, each carrying its own R_t. Errors when both
// terms are disabled.
State combined_guidance(const ScoreModel& model, const NoiseSchedule& sched, const State& x_t,
                        int t, const State& y, const GuidanceConfig& cfg);

struct GuidanceLogEntry {
    int t = 0;
    bool gated = false;
    double norm_gl = 0.0;  // |g_long|_1
    double norm_gs = 0.0;  // |g_short|_1
};

struct PurifyResult {
    State x0;
    ReverseTrajectory trajectory;
    std::vector<GuidanceLogEntry> guidance_log;  // one entry per step, t = T..1
    long guidance_evaluations = 0;
    double wall_time_total_s = 0.0;
    double wall_time_guidance_s = 0.0;
};

// The purification loop: x_T ~ N(0, I); for t = T..1 take one reverse step
// and, when t lies in [e, s], add the combined guidance evaluated at x_t to
// x_{t-1}. With guidance disabled this reproduces sample_unconditional
// bit-for-bit at the same seed.
PurifyResult purify(const ScoreModel& model, const NoiseSchedule& sched, const State& y,
                    const GuidanceConfig& cfg, std::uint64_t seed);

// Probe hook for diagnostics: called once per step after the reverse update,
// before guidance, with (t, x_t, gated).
using StepProbe = std::function<void(int, const State&, bool)>;
PurifyResult purify_probed(const ScoreModel& model, const NoiseSchedule& sched, const State& y,
                           const GuidanceConfig& cfg, std::uint64_t seed, const StepProbe& probe);

void guidance_log_csv(const PurifyResult& result, const std::string& path,
                      const std::vector<double>* minabs_to_ori = nullptr);

}  // namespace diffpurify

#endif
