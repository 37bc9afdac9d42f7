#pragma once

#include <vector>

#include "pdnac/cmdp.hpp"
#include "pdnac/policy.hpp"
#include "pdnac/rng.hpp"

namespace pdnac {

/// Position of the single simulated chain plus the stream it currently draws from.
///
/// The state only changes by sampling; switch_stream() changes where randomness comes
/// from without touching the state, so subroutines can own their (epoch, tag, step)
/// stream while the chain itself is never reset.
class ChainCursor {
public:
    ChainCursor(Index state, std::uint64_t seed) : state_(state), seed_(seed), rng_(make_stream(seed, StreamTag::init)) {}

    /// s_0 ~ rho drawn from the run's init stream.
    static ChainCursor start(const TabularCmdp& m, std::uint64_t seed) {
        ChainCursor c(0, seed);
        c.state_ = m.initial_state_from_uniform(uniform01(c.rng_));
        return c;
    }

    [[nodiscard]] Index state() const { return state_; }
    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] const StreamKey& stream() const { return key_; }

    void switch_stream(std::uint64_t epoch, StreamTag tag, std::uint64_t step) {
        key_ = StreamKey{seed_, epoch, tag, step};
        rng_ = make_stream(key_);
    }

    Rng& rng() { return rng_; }

    /// Advance one step under the given policy table.
    Transition step(const TabularCmdp& m, const PolicyTable& pi) {
        Transition z;
        z.s = state_;
        z.a = pi.action_from_uniform(state_, uniform01(rng_));
        z.s_next = m.next_state_from_uniform(z.s, z.a, uniform01(rng_));
        z.reward = m.reward()(z.s, z.a);
        z.cost = m.cost()(z.s, z.a);
        state_ = z.s_next;
        return z;
    }

private:
    Index state_;
    std::uint64_t seed_;
    StreamKey key_{};
    Rng rng_;
};

inline void check_compatible(const TabularCmdp& m, const PolicyTable& pi) {
    if (pi.n_states() != m.n_states() || pi.n_actions() != m.n_actions())
        throw ConfigError("policy dimensions do not match the CMDP");
}

/// Appends `len` transitions to `out` (cleared first); the cursor ends at the last s'.
inline void sample_trajectory_into(const TabularCmdp& m, const PolicyTable& pi, ChainCursor& cursor, long len,
                                   std::vector<Transition>& out) {
    if (len < 1) throw ConfigError("trajectory length must be >= 1");
    check_compatible(m, pi);
    out.clear();
    out.reserve(static_cast<std::size_t>(len));
    for (long t = 0; t < len; ++t) out.push_back(cursor.step(m, pi));
}

inline std::vector<Transition> sample_trajectory(const TabularCmdp& m, const PolicyTable& pi, ChainCursor& cursor,
                                                 long len) {
    std::vector<Transition> out;
    sample_trajectory_into(m, pi, cursor, len, out);
    return out;
}

inline std::vector<Transition> sample_trajectory(const TabularCmdp& m, const ParamPolicy& pi, ChainCursor& cursor,
                                                 long len) {
    pi.check_compatible(m);
    return sample_trajectory(m, PolicyTable(pi), cursor, len);
}

}  // namespace pdnac
