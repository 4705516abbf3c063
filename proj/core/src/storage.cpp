#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "estatcom/plant.hpp"

namespace estatcom {

StorageState make_storage(const StorageParams& params) {
  StorageState st;
  st.E_sc = params.soc_initial * params.E_rated;
  st.soc = params.soc_initial;
  st.P_limit = params.P_limit;
  st.available = params.E_rated > 0.0;
  return st;
}

StorageStepResult storage_step(const StorageState& st, double P_dc_ref, double v_dc, double dt,
                               const StorageParams& params, bool connected) {
  if (!(dt > 0.0)) throw std::invalid_argument("storage_step requires dt > 0");
  StorageStepResult out{st, false};
  StorageState& next = out.state;
  if (!st.available || !connected || !(v_dc > 0.0)) {
    next.P_dc = 0.0;
    return out;
  }
  const double target = std::clamp(P_dc_ref, -st.P_limit, st.P_limit);
  const double decay = params.tau > 0.0 ? std::exp(-dt / params.tau) : 0.0;
  next.P_dc = target + (st.P_dc - target) * decay;
  next.E_sc = st.E_sc - next.P_dc * dt;
  next.soc = params.E_rated > 0.0 ? next.E_sc / params.E_rated : 0.0;
  if (next.soc < params.soc_min || next.soc > params.soc_max) {
    next.available = false;
    next.P_dc = 0.0;
    next.soc = std::clamp(next.soc, 0.0, 1.0);
    out.became_unavailable = true;
  }
  return out;
}

}  // namespace estatcom
