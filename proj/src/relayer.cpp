#include "excall/relayer.hpp"

#include <httplib.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "excall/contracts.hpp"

namespace excall::oracle {

Relayer::Relayer(Node& node, crypto::KeyPair keypair, Options options)
    : node_(node),
      keypair_(std::move(keypair)),
      opt_(std::move(options)),
      stream_(opt_.win_probability, opt_.rng_seed) {
    address_ = crypto::address_of(keypair_.public_key);
    account_nonce_ = node_.state().account_nonce(address_);
    load_cursor();
}

bool Relayer::outcome_for(uint64_t ref) {
    if (!opt_.service_url) return stream_.next_win();
    // Fetch from the service; the ref doubles as a request nonce so the
    // outcome is still drawn from the service's stream.
    Nonce nonce = crypto::hash_bytes(encode(std::vector<Intention>{
        Intention{uint32_t(ref), 0, *opt_.service_url}}));
    auto parts = parse_http_uri(*opt_.service_url + "/excallrand?nonce=" +
                                hex_encode(nonce));
    if (!parts) return stream_.next_win();
    httplib::Client cli(parts->host, parts->port);
    cli.set_read_timeout(2, 0);
    auto res = cli.Get(parts->path_query);
    if (!res || res->status != 200) return stream_.next_win();
    try {
        auto j = nlohmann::json::parse(res->body);
        auto body = base64_decode(j.at("response").get<std::string>());
        return body && !body->empty() && (*body)[0] == '1';
    } catch (const std::exception&) {
        return stream_.next_win();
    }
}

size_t Relayer::poll() {
    uint64_t head = node_.height();
    size_t submitted = 0;
    Word topic = contracts::topic_bet_placed();
    while (cursor_ <= head) {
        for (const auto& [num, ev] : node_.events_by_topic(topic, cursor_)) {
            if (num != cursor_ || ev.contract != opt_.contract) continue;
            // EMIT data = punter word || ref word.
            if (ev.data.size() != 64) continue;
            Word punter_w, ref_w;
            std::memcpy(punter_w.data(), ev.data.data(), 32);
            std::memcpy(ref_w.data(), ev.data.data() + 32, 32);
            Address punter = address_from_word(punter_w);
            uint64_t ref = word_to_u64(ref_w);

            bool won = outcome_for(ref);
            Transaction tx = make_call_tx(
                address_, account_nonce_, opt_.contract, "continueBetOracle",
                {punter_w, ref_w, word_from_u64(won ? 1 : 0)});
            auto rej = node_.submit_tx(tx);
            if (rej && rej->reason == RejectReason::StaleNonce) {
                account_nonce_ = node_.state().account_nonce(address_);
                tx.account_nonce = account_nonce_;
                rej = node_.submit_tx(tx);
            }
            if (!rej) {
                ++account_nonce_;
                ++answered_;
                ++submitted;
                callbacks_[{punter, ref}] = tx_identity(tx);
            }
        }
        ++cursor_;
        persist_cursor();
    }
    return submitted;
}

void Relayer::persist_cursor() const {
    if (opt_.cursor_path.empty()) return;
    std::ofstream out(opt_.cursor_path, std::ios::trunc);
    out << cursor_ << "\n" << account_nonce_ << "\n";
}

void Relayer::load_cursor() {
    if (opt_.cursor_path.empty()) return;
    std::ifstream in(opt_.cursor_path);
    if (!in) return;
    uint64_t c = 0, n = 0;
    if (in >> c >> n) {
        cursor_ = c;
        account_nonce_ = std::max(account_nonce_, n);
    }
}

}  // namespace excall::oracle
