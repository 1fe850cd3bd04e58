#include "excall/oracle.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

namespace excall::oracle {

namespace {

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

uint64_t probability_threshold(double p) {
    if (p <= 0.0) return 0;
    if (p >= 1.0) return UINT64_MAX;
    return static_cast<uint64_t>(p * 18446744073709551616.0);
}

}  // namespace

OutcomeStream::OutcomeStream(double win_probability, uint64_t seed)
    : state_(seed), threshold_(probability_threshold(win_probability)),
      always_(win_probability >= 1.0) {}

bool OutcomeStream::next_win() {
    ++draws_;
    bool win = always_ || splitmix64(state_) < threshold_;
    if (win) ++wins_;
    return win;
}

std::optional<UriParts> parse_http_uri(const std::string& uri) {
    const std::string scheme = "http://";
    if (uri.rfind(scheme, 0) != 0) return std::nullopt;
    std::string rest = uri.substr(scheme.size());
    size_t slash = rest.find('/');
    std::string authority = slash == std::string::npos ? rest
                                                       : rest.substr(0, slash);
    UriParts out;
    out.path_query = slash == std::string::npos ? "/" : rest.substr(slash);
    size_t colon = authority.rfind(':');
    if (colon == std::string::npos) {
        out.host = authority;
    } else {
        out.host = authority.substr(0, colon);
        try {
            out.port = std::stoi(authority.substr(colon + 1));
        } catch (...) {
            return std::nullopt;
        }
    }
    if (out.host.empty() || out.port <= 0 || out.port > 65535)
        return std::nullopt;
    return out;
}

struct OracleService::Impl {
    httplib::Server server;
    std::thread thread;
    std::mutex mu;
    OutcomeStream stream;
    int port = 0;
    std::string host;

    Impl(double p, uint64_t seed) : stream(p, seed) {}
};

OracleService::OracleService(crypto::KeyPair keypair, double win_probability,
                             uint64_t rng_seed)
    : impl_(std::make_unique<Impl>(win_probability, rng_seed)),
      keypair_(std::move(keypair)) {}

OracleService::~OracleService() { stop(); }

uint8_t OracleService::next_outcome() {
    std::scoped_lock lk(impl_->mu);
    return impl_->stream.next_win() ? '1' : '0';
}

uint64_t OracleService::draws() const {
    std::scoped_lock lk(impl_->mu);
    return impl_->stream.draws();
}

uint64_t OracleService::wins() const {
    std::scoped_lock lk(impl_->mu);
    return impl_->stream.wins();
}

int OracleService::start(const std::string& host, int port) {
    impl_->host = host;

    impl_->server.Get("/health", [](const httplib::Request&,
                                    httplib::Response& res) {
        res.set_content("ok", "text/plain");
    });

    impl_->server.Get("/excallrand", [this](const httplib::Request& req,
                                            httplib::Response& res) {
        auto nonce_hex = req.get_param_value("nonce");
        auto nonce = fixed_from_hex<32>(nonce_hex);
        if (!nonce) {
            res.status = 400;
            res.set_content("missing or malformed nonce", "text/plain");
            return;
        }
        Bytes body{next_outcome()};
        Bytes sig = crypto::sign_response(keypair_.secret_key, body, *nonce);
        nlohmann::json out = {
            {"response", base64_encode(body)},
            {"nonce", nonce_hex},
            {"pubkey", hex_encode(keypair_.public_key)},
            {"sig", base64_encode(sig)},
        };
        res.set_content(out.dump(), "application/json");
    });

    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
    } else {
        impl_->server.bind_to_port(host, port);
        impl_->port = port;
    }
    if (impl_->port <= 0) throw std::runtime_error("oracle bind failed");
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->port;
}

void OracleService::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
    if (impl_ && impl_->thread.joinable()) impl_->thread.join();
}

std::string OracleService::base_url() const {
    return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

std::optional<vm::ExcallPort::CallResult> HttpExcallPort::do_call(
    const std::string& uri) {
    auto parts = parse_http_uri(uri);
    if (!parts) return std::nullopt;
    httplib::Client cli(parts->host, parts->port);
    cli.set_connection_timeout(0, int(timeout_ms_) * 1000);
    cli.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
    auto res = cli.Get(parts->path_query);
    if (!res || res->status != 200) return std::nullopt;
    try {
        auto j = nlohmann::json::parse(res->body);
        auto response = base64_decode(j.at("response").get<std::string>());
        auto pubkey =
            fixed_from_hex<32>(j.at("pubkey").get<std::string>());
        auto sig = base64_decode(j.at("sig").get<std::string>());
        if (!response || !pubkey || !sig) return std::nullopt;
        CallResult out;
        out.response = std::move(*response);
        out.public_key = *pubkey;
        out.signature = std::move(*sig);
        return out;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

LocalSigningPort::LocalSigningPort(crypto::KeyPair keypair,
                                   double win_probability, uint64_t rng_seed)
    : keypair_(std::move(keypair)),
      threshold_(probability_threshold(win_probability)),
      rng_state_(rng_seed) {}

std::optional<vm::ExcallPort::CallResult> LocalSigningPort::do_call(
    const std::string& uri) {
    // Mirrors the HTTP service: extract the nonce query parameter.
    size_t q = uri.find("nonce=");
    if (q == std::string::npos) return std::nullopt;
    auto nonce = fixed_from_hex<32>(uri.substr(q + 6, 64));
    if (!nonce) return std::nullopt;
    std::scoped_lock lk(mu_);
    bool win = threshold_ == UINT64_MAX || splitmix64(rng_state_) < threshold_;
    CallResult out;
    out.response = Bytes{uint8_t(win ? '1' : '0')};
    out.public_key = keypair_.public_key;
    out.signature =
        crypto::sign_response(keypair_.secret_key, out.response, *nonce);
    return out;
}

}  // namespace excall::oracle
