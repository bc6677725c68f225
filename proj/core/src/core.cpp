#include "fedbuff/core.hpp"

#include <stdexcept>
#include <string>

#include "fedbuff/errors.hpp"

namespace fedbuff {

std::vector<std::string> validate_hyper(const HyperParams& hp, int n) {
  if (hp.local_steps_q < 1) throw ConfigError("hyper.Q: must be >= 1");
  if (!(hp.eta > 0.0)) throw ConfigError("hyper.eta: must be > 0");
  if (!(hp.beta > 0.0)) throw ConfigError("hyper.beta: must be > 0");
  if (hp.buffer_size_k < 1) throw ConfigError("hyper.K: must be >= 1");
  if (!hp.full_batch && hp.batch_size < 1) throw ConfigError("hyper.batch_size: must be >= 1");
  std::vector<std::string> warnings;
  if (n > 0 && hp.buffer_size_k > n) {
    warnings.push_back("hyper.K exceeds the client count n=" + std::to_string(n) +
                       "; every flush will need repeat contributions");
  }
  return warnings;
}

ServerState ServerState::init(ParamVector w0) {
  ServerState s;
  s.accumulator = zeros(w0.size());
  s.model = std::move(w0);
  return s;
}

ClientState client_begin_round(int client_id, const ParamVector& server_model,
                               int64_t server_step) {
  if (!all_finite(server_model)) {
    throw RunAbort("client_begin_round: non-finite server model for client " +
                   std::to_string(client_id));
  }
  ClientState st;
  st.client_id = client_id;
  st.snapshot = server_model;
  st.local_iterate = server_model;
  st.local_step_q = 0;
  st.download_step = server_step;
  return st;
}

void client_local_step(ClientState& state, const HyperParams& hp, const GradOracle& oracle,
                       RngStream& rng) {
  if (state.local_step_q >= hp.local_steps_q) {
    throw std::logic_error("client_local_step: local_step_q already at Q");
  }
  const ParamVector g = oracle(state.local_iterate, rng);
  axpy_inplace(state.local_iterate, -hp.eta, g);
  ++state.local_step_q;
}

ClientUpdate client_finish_round(const ClientState& state, const HyperParams& hp) {
  if (state.local_step_q != hp.local_steps_q) {
    throw std::logic_error("client_finish_round: called at q=" +
                           std::to_string(state.local_step_q) + ", expected Q=" +
                           std::to_string(hp.local_steps_q));
  }
  ClientUpdate u;
  u.client_id = state.client_id;
  u.download_step = state.download_step;
  u.delta = sub(state.snapshot, state.local_iterate);
  return u;
}

std::optional<ServerFlush> server_receive(ServerState& state, const ClientUpdate& update,
                                          const HyperParams& hp) {
  if (update.delta.size() != state.model.size()) {
    throw ConfigError("server_receive: delta dimension mismatch");
  }
  if (!all_finite(update.delta)) {
    throw RunAbort("server_receive: non-finite delta from client " +
                   std::to_string(update.client_id) + " at server step " +
                   std::to_string(state.server_step_t));
  }

  add_inplace(state.accumulator, update.delta);
  state.contributors.push_back({update.client_id, update.download_step});
  ++state.buffer_fill_k;

  if (state.buffer_fill_k < hp.buffer_size_k) return std::nullopt;

  // Flush: w^{t+1} = w^t - beta * sum of buffered deltas.
  ServerFlush flush;
  flush.step = state.server_step_t;
  flush.contributors = std::move(state.contributors);

  axpy_inplace(state.model, -hp.beta, state.accumulator);
  if (!all_finite(state.model)) {
    throw RunAbort("server_receive: non-finite model after flush at server step " +
                   std::to_string(state.server_step_t));
  }
  ++state.server_step_t;
  state.buffer_fill_k = 0;
  state.accumulator.assign(state.accumulator.size(), 0.0);
  state.contributors.clear();
  return flush;
}

}  // namespace fedbuff
