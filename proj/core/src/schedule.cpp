#include "diffpurify/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "diffpurify/tensor_io.hpp"

namespace diffpurify {

namespace {
constexpr double kTerminalSigma = 1e-4;
constexpr double kMaxBeta = 0.999;
}  // namespace

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear-beta") return ScheduleKind::LinearBeta;
    if (s == "cosine") return ScheduleKind::Cosine;
    throw std::invalid_argument("unknown schedule kind: " + s);
}

std::string to_string(ScheduleKind k) {
    return k == ScheduleKind::LinearBeta ? "linear-beta" : "cosine";
}

double NoiseSchedule::at(int t) const {
    if (t < 0 || t > T) throw std::out_of_range("schedule: t out of range");
    return sigma[static_cast<std::size_t>(t)];
}

double NoiseSchedule::beta(int t) const {
    if (t < 1 || t > T) throw std::out_of_range("schedule: beta index out of range");
    return 1.0 - sigma[static_cast<std::size_t>(t)] / sigma[static_cast<std::size_t>(t - 1)];
}

void NoiseSchedule::validate() const {
    if (T < 2 || sigma.size() != static_cast<std::size_t>(T) + 1)
        throw std::invalid_argument("schedule: bad table size");
    if (sigma[0] != 1.0) throw std::invalid_argument("schedule: sigma[0] must be 1");
    for (int t = 1; t <= T; ++t) {
        double s = sigma[static_cast<std::size_t>(t)];
        if (!std::isfinite(s) || s <= 0.0 || s > 1.0)
            throw std::invalid_argument("schedule: sigma out of (0,1]");
        if (s > sigma[static_cast<std::size_t>(t - 1)])
            throw std::invalid_argument("schedule: sigma not monotone");
    }
    if (sigma[static_cast<std::size_t>(T)] > kTerminalSigma)
        throw std::invalid_argument("schedule: terminal sigma too large");
}

NoiseSchedule make_schedule(int T, ScheduleKind kind) {
    double scale = 1000.0 / T;
    return make_schedule(T, kind, 1e-4 * scale, 0.02 * scale);
}

NoiseSchedule make_schedule(int T, ScheduleKind kind, double beta_lo, double beta_hi) {
    if (T < 2) throw std::invalid_argument("make_schedule: T must be >= 2");

    NoiseSchedule out;
    out.T = T;
    out.sigma.assign(static_cast<std::size_t>(T) + 1, 1.0);

    if (kind == ScheduleKind::LinearBeta) {
        if (!(beta_lo > 0.0) || !(beta_hi > 0.0))
            throw std::invalid_argument("make_schedule: betas must be positive");
        for (int t = 1; t <= T; ++t) {
            double b = beta_lo + (beta_hi - beta_lo) * (t - 1) / static_cast<double>(T - 1);
            b = std::min(b, kMaxBeta);
            out.sigma[static_cast<std::size_t>(t)] = out.sigma[static_cast<std::size_t>(t - 1)] * (1.0 - b);
        }
    } else {
        // squared-cosine signal fraction with the usual 0.008 offset
        const double s = 0.008;
        auto abar = [&](double t) {
            double v = std::cos((t / T + s) / (1.0 + s) * M_PI / 2.0);
            return v * v;
        };
        double a0 = abar(0.0);
        for (int t = 1; t <= T; ++t) {
            double b = 1.0 - abar(static_cast<double>(t)) / abar(static_cast<double>(t - 1));
            b = std::clamp(b, 0.0, kMaxBeta);
            out.sigma[static_cast<std::size_t>(t)] = out.sigma[static_cast<std::size_t>(t - 1)] * (1.0 - b);
        }
        (void)a0;
    }

    // Force the terminal state to pure noise when the ramp does not get there
    // on its own (short chains, flat ramps).
    auto& last = out.sigma[static_cast<std::size_t>(T)];
    last = std::min(last, kTerminalSigma);

    out.validate();
    return out;
}

void save_schedule(const std::string& path, const NoiseSchedule& sched) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(sched.sigma.size())};
    t.data = sched.sigma;
    save_tensor(path, t);
}

NoiseSchedule load_schedule(const std::string& path) {
    Tensor t = load_tensor(path);
    if (t.dims.size() != 1 || t.dims[0] < 3)
        throw std::runtime_error("load_schedule: expected a rank-1 table");
    NoiseSchedule out;
    out.T = static_cast<int>(t.dims[0]) - 1;
    out.sigma = std::move(t.data);
    out.validate();
    return out;
}

State forward_diffuse(const NoiseSchedule& sched, const State& x, int t, const State& noise) {
    if (t < 1 || t > sched.T) throw std::out_of_range("forward_diffuse: t out of range");
    check_same_dim(x, noise, "forward_diffuse");
    double s = sched.at(t);
    double a = std::sqrt(s);
    double b = std::sqrt(1.0 - s);
    State out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * noise[i];
    return out;
}

}  // namespace diffpurify
