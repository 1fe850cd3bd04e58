#pragma once

#include <memory>
#include <queue>

#include "excall/chain.hpp"
#include "excall/oracle.hpp"

namespace excall::netsim {

struct DeliveryRecord {
    uint64_t sent_at = 0;
    uint64_t delivered_at = 0;
    size_t from = 0;
    size_t to = 0;
    uint64_t block_number = 0;
};

// In-process multi-node harness: one message bus with constant per-link
// latency, lossless and ordered. Drive it with tick(now); now may be
// virtual or wall-clock milliseconds.
class SimNetwork {
public:
    explicit SimNetwork(uint64_t latency_ms = 0) : latency_ms_(latency_ms) {}

    // The port is owned by the caller and must outlive the network.
    size_t spawn_node(NodeRole role, const ChainConfig& config,
                      std::optional<crypto::KeyPair> sealer_key = std::nullopt,
                      vm::ExcallPort* port = nullptr);

    Node& node(size_t i) { return *nodes_.at(i); }
    const Node& node(size_t i) const { return *nodes_.at(i); }
    size_t node_count() const { return nodes_.size(); }

    // Sealers produce due blocks, produced blocks are broadcast, and
    // messages whose latency has elapsed are delivered in order.
    void tick(uint64_t now_ms);

    // Virtual-time driver: ticks in `step_ms` increments.
    void run_until(uint64_t until_ms, uint64_t step_ms);

    void broadcast(size_t from, const Block& block, uint64_t now_ms);
    bool idle() const { return queue_.empty(); }

    const std::vector<DeliveryRecord>& delivered_log() const {
        return delivered_;
    }
    // All nodes agree on head digest, state root and height.
    bool replicas_agree() const;

private:
    struct Message {
        uint64_t deliver_at;
        uint64_t seq;  // FIFO among equal timestamps
        size_t from;
        size_t to;
        Block block;
        bool operator>(const Message& o) const {
            return std::tie(deliver_at, seq) > std::tie(o.deliver_at, o.seq);
        }
    };

    uint64_t latency_ms_;
    uint64_t seq_ = 0;
    std::vector<std::unique_ptr<Node>> nodes_;
    std::vector<NodeRole> roles_;
    std::optional<Digest> genesis_config_;
    std::priority_queue<Message, std::vector<Message>, std::greater<>> queue_;
    std::vector<DeliveryRecord> delivered_;
};

}  // namespace excall::netsim
