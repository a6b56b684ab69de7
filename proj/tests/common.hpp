#pragma once

#include "fracpeak/groundstate.hpp"

namespace fracpeak::testing {

// h about 0.03 on a +-500 window: fine enough for the derivative mode,
// wide enough for eps down to 0.005 on the unit domain
inline GroundStateOptions small_options() {
    GroundStateOptions o;
    o.L = 500.0;
    o.n = 32768;
    o.pad = 4;
    return o;
}

inline const GroundState& shared_ground_state() {
    static const GroundState G = solve_ground_state(ModelParams{}, small_options());
    return G;
}

inline const RieszProfile& shared_riesz_profile() {
    static const RieszProfile W = riesz_profile(shared_ground_state());
    return W;
}

} // namespace fracpeak::testing
