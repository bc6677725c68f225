#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedbuff/rng.hpp"
#include "fedbuff/vec_ops.hpp"

namespace fedbuff {

// Client and server sides of buffered asynchronous aggregation, written as
// pure state machines with no notion of time. The simulator (or any real
// transport) owns scheduling; these functions own the arithmetic.

struct HyperParams {
  int64_t local_steps_q = 1;   // Q
  double eta = 0.1;            // local stepsize
  double beta = 1.0;           // server stepsize, applied to the raw buffered sum
  int64_t buffer_size_k = 1;   // K
  int64_t batch_size = 1;      // b
  bool full_batch = false;     // exact local gradients instead of sampled batches
};

// Throws ConfigError naming the first violated field; returns human-readable
// warnings (e.g. K > n) without failing.
std::vector<std::string> validate_hyper(const HyperParams& hp, int n);

struct ClientState {
  int client_id = 0;
  ParamVector snapshot;       // downloaded model w_{i,0}
  ParamVector local_iterate;  // w_{i,q}
  int64_t local_step_q = 0;   // in [0, Q]
  int64_t download_step = 0;  // server step the snapshot was taken at
};

struct ClientUpdate {
  int client_id = 0;
  ParamVector delta;          // snapshot - final local iterate
  int64_t download_step = 0;
};

struct Contributor {
  int client_id = 0;
  int64_t download_step = 0;
};

struct ServerState {
  ParamVector model;        // w^t
  ParamVector accumulator;  // buffered sum of deltas; zero whenever the buffer is empty
  int64_t buffer_fill_k = 0;
  int64_t server_step_t = 0;
  std::vector<Contributor> contributors;  // one entry per buffered delta

  static ServerState init(ParamVector w0);
};

// Emitted when a receive fills the buffer: `step` is the server step the
// flush consumed (the model moved from w^step to w^{step+1}) and
// `contributors` lists the aggregated updates in arrival order.
struct ServerFlush {
  int64_t step = 0;
  std::vector<Contributor> contributors;
};

// Local gradient oracle: model in, gradient out. The caller binds the batch
// size and dataset; rng is the client's dedicated substream for this round.
using GradOracle = std::function<ParamVector(const ParamVector& w, RngStream& rng)>;

ClientState client_begin_round(int client_id, const ParamVector& server_model,
                               int64_t server_step);

// One local SGD step: w_{i,q+1} = w_{i,q} - eta * oracle(w_{i,q}).
// Precondition: local_step_q < Q (logic_error otherwise).
void client_local_step(ClientState& state, const HyperParams& hp, const GradOracle& oracle,
                       RngStream& rng);

// Precondition: local_step_q == Q. Delta is snapshot - local_iterate.
ClientUpdate client_finish_round(const ClientState& state, const HyperParams& hp);

// Buffers the update; on the K-th receive applies
// model -= beta * accumulator (raw sum, not mean), advances the step counter
// and empties the buffer atomically. Aborts the run on non-finite deltas or
// a non-finite post-flush model.
std::optional<ServerFlush> server_receive(ServerState& state, const ClientUpdate& update,
                                          const HyperParams& hp);

}  // namespace fedbuff
