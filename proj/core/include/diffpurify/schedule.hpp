#ifndef DIFFPURIFY_SCHEDULE_HPP
#define DIFFPURIFY_SCHEDULE_HPP

#include <string>
#include <vector>

#include "diffpurify/state.hpp"

namespace diffpurify {

enum class ScheduleKind { LinearBeta, Cosine };

ScheduleKind schedule_kind_from_string(const std::string& s);
std::string to_string(ScheduleKind k);

// Discrete noise schedule. sigma[t] is the signal fraction at step t:
//   x_t = sqrt(sigma[t]) * x_0 + sqrt(1 - sigma[t]) * eps
// with sigma[0] = 1 (clean data) and sigma[T] <= 1e-4 (pure noise).
struct NoiseSchedule {
    int T = 0;
    std::vector<double> sigma;  // size T+1

    double at(int t) const;
    // Per-step decay beta_t = 1 - sigma[t]/sigma[t-1], 1 <= t <= T.
    double beta(int t) const;
    void validate() const;
};

// Default beta ranges follow the DDPM convention rescaled to T steps:
// [1e-4, 0.02] * (1000/T), each beta clamped to <= 0.999.
NoiseSchedule make_schedule(int T, ScheduleKind kind);

// Same construction with an explicit linear beta ramp [beta_lo, beta_hi]
// (ignored by the cosine kind). beta_lo == beta_hi gives a flat ramp.
NoiseSchedule make_schedule(int T, ScheduleKind kind, double beta_lo, double beta_hi);

// x_t = sqrt(sigma[t]) * x + sqrt(1 - sigma[t]) * noise, elementwise.
State forward_diffuse(const NoiseSchedule& sched, const State& x, int t, const State& noise);

// Portable-tensor round trip of the sigma table (rank-1, length T+1).
void save_schedule(const std::string& path, const NoiseSchedule& sched);
NoiseSchedule load_schedule(const std::string& path);

}  // namespace diffpurify

#endif
