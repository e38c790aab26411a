#include "diffpurify/sampler.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "diffpurify/tensor_io.hpp"

namespace diffpurify {

const StepRecord& ReverseTrajectory::at_time(int t) const {
    // states run from t = T down to 0
    std::size_t idx = static_cast<std::size_t>(T - t);
    if (t < 0 || t > T || idx >= states.size())
        throw std::out_of_range("trajectory: no record at t=" + std::to_string(t));
    return states[idx];
}

State tweedie_estimate(const ScoreModel& model, const NoiseSchedule& sched, const State& x_t, int t) {
    if (t < 0 || t > sched.T) throw std::out_of_range("tweedie_estimate: t out of range");
    double s = sched.at(t);
    if (!(s > 0.0)) throw std::domain_error("tweedie_estimate: sigma(t) = 0");
    State sc = model.score(x_t, t);
    double rs = std::sqrt(s);
    State out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = (x_t[i] + (1.0 - s) * sc[i]) / rs;
    return out;
}

State reverse_step(const ScoreModel& model, const NoiseSchedule& sched, const State& x_t, int t,
                   RngStream& rng) {
    if (t < 1 || t > sched.T) throw std::out_of_range("reverse_step: t out of range");
    double alpha = sched.at(t) / sched.at(t - 1);
    double beta = 1.0 - alpha;
    State sc = model.score(x_t, t);
    double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
    State out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = (x_t[i] + beta * sc[i]) * inv_sqrt_alpha;
    if (t > 1) {
        double nstd = std::sqrt(beta);
        for (auto& v : out) v += nstd * rng.gaussian();
    }
    if (!all_finite(out))
        throw std::runtime_error("reverse_step: non-finite state at t=" + std::to_string(t));
    return out;
}

ReverseTrajectory sample_unconditional(const ScoreModel& model, const NoiseSchedule& sched,
                                       std::uint64_t seed) {
    ReverseTrajectory traj;
    traj.seed = seed;
    traj.T = sched.T;
    RngStream rng(seed);
    State x = rng.gaussian_vec(model.dim());
    for (int t = sched.T; t >= 1; --t) {
        traj.states.push_back({t, x, tweedie_estimate(model, sched, x, t)});
        x = reverse_step(model, sched, x, t, rng);
    }
    traj.states.push_back({0, x, x});  // sigma(0) = 1, so the estimate is the state itself
    return traj;
}

void trajectory_scalars_csv(const ReverseTrajectory& traj, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("trajectory_scalars_csv: cannot open " + path);
    os << "t,l2_x,l2_xhat\n";
    char buf[96];
    for (const auto& rec : traj.states) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", rec.t, l2_norm(rec.x), l2_norm(rec.x_hat));
        os << buf;
    }
}

}  // namespace diffpurify
