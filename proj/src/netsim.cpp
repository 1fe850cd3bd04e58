#include "excall/netsim.hpp"

namespace excall::netsim {

size_t SimNetwork::spawn_node(NodeRole role, const ChainConfig& config,
                              std::optional<crypto::KeyPair> sealer_key,
                              vm::ExcallPort* port) {
    Digest cfg = config.config_digest();
    if (!genesis_config_) {
        genesis_config_ = cfg;
    } else if (*genesis_config_ != cfg) {
        throw std::invalid_argument("node refuses to join: genesis mismatch");
    }
    nodes_.push_back(
        std::make_unique<Node>(config, role, std::move(sealer_key), port));
    roles_.push_back(role);
    return nodes_.size() - 1;
}

void SimNetwork::broadcast(size_t from, const Block& block, uint64_t now_ms) {
    for (size_t to = 0; to < nodes_.size(); ++to) {
        if (to == from) continue;
        queue_.push(Message{now_ms + latency_ms_, seq_++, from, to, block});
    }
}

void SimNetwork::tick(uint64_t now_ms) {
    for (size_t i = 0; i < nodes_.size(); ++i) {
        if (roles_[i] != NodeRole::SEALER) continue;
        if (auto block = nodes_[i]->produce(now_ms))
            broadcast(i, *block, now_ms);
    }
    while (!queue_.empty() && queue_.top().deliver_at <= now_ms) {
        Message m = queue_.top();
        queue_.pop();
        // Lossless ordered delivery; a failed verify here is a harness bug.
        auto rej = nodes_[m.to]->receive(m.block);
        if (rej)
            throw std::runtime_error(
                "verifier rejected broadcast block: " +
                std::string(to_string(rej->reason)) + " (" + rej->detail +
                ")");
        delivered_.push_back(DeliveryRecord{m.deliver_at - latency_ms_,
                                            now_ms, m.from, m.to,
                                            m.block.header.number});
    }
}

void SimNetwork::run_until(uint64_t until_ms, uint64_t step_ms) {
    if (step_ms == 0) step_ms = 1;
    for (uint64_t t = 0; t <= until_ms; t += step_ms) tick(t);
}

bool SimNetwork::replicas_agree() const {
    if (nodes_.empty()) return true;
    Digest head = nodes_[0]->head_digest();
    uint64_t height = nodes_[0]->height();
    Digest root = nodes_[0]->head().state_root;
    for (const auto& n : nodes_) {
        if (n->head_digest() != head || n->height() != height ||
            n->head().state_root != root)
            return false;
    }
    return true;
}

}  // namespace excall::netsim
