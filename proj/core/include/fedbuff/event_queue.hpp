#pragma once

#include <cstdint>
#include <queue>
#include <vector>

#include "fedbuff/core.hpp"
#include "fedbuff/errors.hpp"

namespace fedbuff {

// Discrete-event primitives. Events are totally ordered by
// (fire_time, sequence_no); the sequence number is assigned at creation and
// unique, so simultaneous events resolve deterministically in creation order.

enum class EventKind { DownloadComplete, UploadComplete };

struct SimEvent {
  double fire_time = 0.0;
  uint64_t sequence_no = 0;
  EventKind kind = EventKind::DownloadComplete;
  int client_id = 0;
  ClientUpdate update;  // populated for UploadComplete only
};

class EventQueue {
 public:
  uint64_t push_download(double fire_time, int client_id) {
    SimEvent e;
    e.fire_time = fire_time;
    e.sequence_no = next_seq_++;
    e.kind = EventKind::DownloadComplete;
    e.client_id = client_id;
    const uint64_t seq = e.sequence_no;
    heap_.push(std::move(e));
    return seq;
  }

  uint64_t push_upload(double fire_time, int client_id, ClientUpdate update) {
    SimEvent e;
    e.fire_time = fire_time;
    e.sequence_no = next_seq_++;
    e.kind = EventKind::UploadComplete;
    e.client_id = client_id;
    e.update = std::move(update);
    const uint64_t seq = e.sequence_no;
    heap_.push(std::move(e));
    return seq;
  }

  bool empty() const { return heap_.empty(); }
  size_t size() const { return heap_.size(); }

  // Pops the minimum under (fire_time, sequence_no).
  SimEvent pop_next() {
    if (heap_.empty()) {
      throw RunAbort("event queue empty before horizon: simulation deadlock");
    }
    SimEvent e = heap_.top();
    heap_.pop();
    return e;
  }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      if (a.fire_time != b.fire_time) return a.fire_time > b.fire_time;
      return a.sequence_no > b.sequence_no;
    }
  };
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> heap_;
  uint64_t next_seq_ = 0;
};

}  // namespace fedbuff
