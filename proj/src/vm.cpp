#include "excall/vm.hpp"

#include "excall/crypto.hpp"

namespace excall::vm {

Word reserved_key(uint8_t tail) {
    Word w;
    w.fill(0xFF);
    w[31] = tail;
    return w;
}

Word rk_input(uint8_t i) { return reserved_key(i); }

bool is_reserved_key(const Word& k) {
    for (int i = 0; i < 24; ++i)
        if (k[i] != 0xFF) return false;
    return true;
}

std::set<uint32_t> instruction_boundaries(const Bytes& bc) {
    std::set<uint32_t> out;
    size_t pc = 0;
    while (pc < bc.size()) {
        out.insert(static_cast<uint32_t>(pc));
        uint8_t op = bc[pc];
        switch (op) {
            case OP_PUSH8:
                pc += 9;
                break;
            case OP_PUSHB: {
                if (pc + 1 >= bc.size())
                    throw ValidationError("truncated PUSHB");
                uint8_t len = bc[pc + 1];
                if (len > 32) throw ValidationError("PUSHB operand > 32");
                pc += 2 + len;
                break;
            }
            case OP_EXCALL: {
                if (pc + 2 >= bc.size())
                    throw ValidationError("truncated EXCALL");
                uint16_t len = uint16_t(bc[pc + 1]) | (uint16_t(bc[pc + 2]) << 8);
                pc += 3 + len;
                break;
            }
            case OP_STOP:
            case OP_DUP:
            case OP_POP:
            case OP_ADD:
            case OP_SUB:
            case OP_EQ:
            case OP_LT:
            case OP_NOT:
            case OP_JUMP:
            case OP_JUMPI:
            case OP_CALLER:
            case OP_SLOAD:
            case OP_SSTORE:
            case OP_EMIT:
            case OP_REVERT:
                pc += 1;
                break;
            default:
                throw ValidationError("unknown opcode");
        }
        if (pc > bc.size()) throw ValidationError("truncated immediate");
    }
    return out;
}

void validate_program(const ContractProgram& p) {
    if (p.bytecode.size() > kMaxBytecodeSize)
        throw ValidationError("bytecode too large");
    auto bounds = instruction_boundaries(p.bytecode);
    for (const auto& [sel, off] : p.entry_points) {
        if (!bounds.count(off) && !(off == 0 && p.bytecode.empty()))
            throw ValidationError("entry point off instruction boundary");
    }
    // EXCALL operands must look like http URIs.
    size_t pc = 0;
    const Bytes& bc = p.bytecode;
    while (pc < bc.size()) {
        uint8_t op = bc[pc];
        if (op == OP_PUSH8) {
            pc += 9;
        } else if (op == OP_PUSHB) {
            pc += 2 + bc[pc + 1];
        } else if (op == OP_EXCALL) {
            uint16_t len = uint16_t(bc[pc + 1]) | (uint16_t(bc[pc + 2]) << 8);
            std::string uri(bc.begin() + pc + 3, bc.begin() + pc + 3 + len);
            if (uri.rfind("http", 0) != 0)
                throw ValidationError("EXCALL operand must start with http");
            pc += 3 + len;
        } else {
            pc += 1;
        }
    }
}

std::string resolve_uri(const std::string& uri_template, const Nonce& nonce) {
    std::string out = uri_template;
    const std::string ph = "{nonce}";
    size_t pos;
    std::string hex = hex_encode(nonce);
    while ((pos = out.find(ph)) != std::string::npos)
        out.replace(pos, ph.size(), hex);
    return out;
}

std::array<uint8_t, 4> selector(std::string_view name) {
    if (name.empty()) throw std::invalid_argument("empty selector name");
    Digest d = crypto::hash_str(name);
    return {d[0], d[1], d[2], d[3]};
}

namespace {

// Uncommitted write overlay plus transient registers for reserved keys.
class Scratch {
public:
    Scratch(Storage& base, const Bytes& args, uint32_t max_input_words)
        : base_(base) {
        input_count_ = uint32_t((args.size() + 31) / 32);
        if (input_count_ > max_input_words) input_count_ = max_input_words;
        for (uint32_t i = 0; i < input_count_; ++i) {
            std::span<const uint8_t> chunk(
                args.data() + i * 32,
                std::min<size_t>(32, args.size() - i * 32));
            Word w{};
            std::memcpy(w.data(), chunk.data(), chunk.size());  // left-aligned
            inputs_.push_back(w);
        }
    }

    Word get(const Word& key) const {
        if (is_reserved_key(key)) {
            if (key == rk_response()) return response_word_;
            if (key == rk_response_len())
                return word_from_u64(response_len_);
            if (key == rk_input_count()) return word_from_u64(input_count_);
            for (uint32_t i = 0; i < inputs_.size() && i < 8; ++i)
                if (key == rk_input(uint8_t(i))) return inputs_[i];
            return Word{};
        }
        auto it = writes_.find(key);
        if (it != writes_.end()) return it->second;
        return base_.get(key);
    }

    bool set(const Word& key, const Word& value) {
        if (is_reserved_key(key)) return false;
        writes_[key] = value;
        return true;
    }

    void set_response(std::span<const uint8_t> body) {
        response_word_ = Word{};
        std::memcpy(response_word_.data(), body.data(),
                    std::min<size_t>(32, body.size()));
        response_len_ = body.size();
    }

    void commit() {
        for (const auto& [k, v] : writes_) base_.set(k, v);
    }

private:
    Storage& base_;
    std::map<Word, Word> writes_;
    std::vector<Word> inputs_;
    uint32_t input_count_ = 0;
    Word response_word_{};
    uint64_t response_len_ = 0;
};

struct Machine {
    std::vector<Word> stack;

    bool pop(Word& out) {
        if (stack.empty()) return false;
        out = stack.back();
        stack.pop_back();
        return true;
    }
    void push(const Word& w) { stack.push_back(w); }
};

}  // namespace

ExecResult execute(const ContractProgram& program, const ExecContext& ctx,
                   Storage& storage,
                   const std::vector<VerifiableExternalCall>& recorded) {
    ExecResult res;
    const Bytes& bc = program.bytecode;

    // Entry dispatch: first 4 input bytes select the entry point when the
    // program declares any; otherwise execution starts at offset 0.
    uint32_t pc = 0;
    Bytes args = ctx.input;
    if (!program.entry_points.empty()) {
        if (ctx.input.size() < 4) {
            res.status = TxStatus::FAILED_EXEC;
            return res;
        }
        std::array<uint8_t, 4> sel{ctx.input[0], ctx.input[1], ctx.input[2],
                                   ctx.input[3]};
        auto it = program.entry_points.find(sel);
        if (it == program.entry_points.end()) {
            res.status = TxStatus::FAILED_EXEC;
            return res;
        }
        pc = it->second;
        args.assign(ctx.input.begin() + 4, ctx.input.end());
    }

    std::set<uint32_t> bounds;
    try {
        bounds = instruction_boundaries(bc);
    } catch (const ValidationError&) {
        res.status = TxStatus::FAILED_EXEC;
        return res;
    }

    Scratch scratch(storage, args, 8);
    Machine m;
    uint64_t steps = 0;
    uint32_t cursor = 0;  // index into recorded / performed calls

    // Initiator-attached txs replay their own tuples even at finalization.
    const bool replaying = ctx.mode == ExecMode::VERIFY || !recorded.empty();

    auto fail = [&](TxStatus s) {
        res.status = s;
        res.events.clear();
        return res;
    };

    while (true) {
        if (++steps > ctx.step_limit) return fail(TxStatus::FAILED_EXEC);
        if (pc >= bc.size()) break;  // fell off the end: implicit STOP
        uint8_t op = bc[pc];
        switch (op) {
            case OP_STOP:
                goto done;
            case OP_REVERT:
                return fail(TxStatus::FAILED_EXEC);
            case OP_PUSH8: {
                uint64_t v = 0;
                for (int i = 0; i < 8; ++i)
                    v |= uint64_t(bc[pc + 1 + i]) << (8 * i);
                m.push(word_from_u64(v));
                pc += 9;
                break;
            }
            case OP_PUSHB: {
                uint8_t len = bc[pc + 1];
                m.push(word_from_bytes({bc.data() + pc + 2, len}));
                pc += 2 + len;
                break;
            }
            case OP_DUP: {
                if (m.stack.empty()) return fail(TxStatus::FAILED_EXEC);
                m.push(m.stack.back());
                pc += 1;
                break;
            }
            case OP_POP: {
                Word w;
                if (!m.pop(w)) return fail(TxStatus::FAILED_EXEC);
                pc += 1;
                break;
            }
            case OP_ADD:
            case OP_SUB:
            case OP_EQ:
            case OP_LT: {
                Word b, a;
                if (!m.pop(b) || !m.pop(a)) return fail(TxStatus::FAILED_EXEC);
                if (op == OP_ADD) m.push(word_add(a, b));
                else if (op == OP_SUB) m.push(word_sub(a, b));
                else if (op == OP_EQ)
                    m.push(word_from_u64(word_cmp(a, b) == 0 ? 1 : 0));
                else m.push(word_from_u64(word_cmp(a, b) < 0 ? 1 : 0));
                pc += 1;
                break;
            }
            case OP_NOT: {
                Word a;
                if (!m.pop(a)) return fail(TxStatus::FAILED_EXEC);
                m.push(word_from_u64(word_is_zero(a) ? 1 : 0));
                pc += 1;
                break;
            }
            case OP_JUMP:
            case OP_JUMPI: {
                Word target, cond;
                if (!m.pop(target)) return fail(TxStatus::FAILED_EXEC);
                bool take = true;
                if (op == OP_JUMPI) {
                    if (!m.pop(cond)) return fail(TxStatus::FAILED_EXEC);
                    take = !word_is_zero(cond);
                }
                if (take) {
                    uint64_t t = word_to_u64(target);
                    if (!bounds.count(uint32_t(t)) || t > bc.size())
                        return fail(TxStatus::FAILED_EXEC);
                    pc = uint32_t(t);
                } else {
                    pc += 1;
                }
                break;
            }
            case OP_CALLER:
                m.push(word_from_address(ctx.caller));
                pc += 1;
                break;
            case OP_SLOAD: {
                Word k;
                if (!m.pop(k)) return fail(TxStatus::FAILED_EXEC);
                m.push(scratch.get(k));
                pc += 1;
                break;
            }
            case OP_SSTORE: {
                Word k, v;
                if (!m.pop(k) || !m.pop(v)) return fail(TxStatus::FAILED_EXEC);
                if (!scratch.set(k, v)) return fail(TxStatus::FAILED_EXEC);
                pc += 1;
                break;
            }
            case OP_EMIT: {
                Word topic, d1, d2;
                if (!m.pop(topic) || !m.pop(d1) || !m.pop(d2))
                    return fail(TxStatus::FAILED_EXEC);
                EventLog ev;
                ev.contract = ctx.self;
                ev.topic = topic;
                ev.data.insert(ev.data.end(), d1.begin(), d1.end());
                ev.data.insert(ev.data.end(), d2.begin(), d2.end());
                res.events.push_back(std::move(ev));
                pc += 1;
                break;
            }
            case OP_EXCALL: {
                uint16_t len =
                    uint16_t(bc[pc + 1]) | (uint16_t(bc[pc + 2]) << 8);
                std::string uri_template(bc.begin() + pc + 3,
                                         bc.begin() + pc + 3 + len);
                pc += 3 + len;

                if (cursor >= ctx.max_excalls)
                    return fail(TxStatus::FAILED_EXEC);

                if (ctx.mode == ExecMode::DRY_RUN) {
                    res.intended_uris.push_back(uri_template);
                    return fail(TxStatus::FAILED_EXCALL_NO_RESPONSE);
                }

                if (replaying) {
                    if (cursor >= recorded.size())
                        return fail(TxStatus::FAILED_EXCALL_UNVERIFIED);
                    const auto& rec = recorded[cursor];
                    std::string expect =
                        resolve_uri(uri_template, rec.request_nonce);
                    if (rec.request_uri != expect)
                        return fail(TxStatus::FAILED_EXCALL_UNVERIFIED);
                    if (!crypto::verify_response(rec.public_key, rec.response,
                                                 rec.request_nonce,
                                                 rec.signature))
                        return fail(TxStatus::FAILED_EXCALL_UNVERIFIED);
                    scratch.set_response(rec.response);
                    m.push(word_from_u64(
                        rec.response.empty() ? 0 : rec.response[0]));
                    res.excalls_consumed = ++cursor;
                    break;
                }

                // FINALIZE: live call through the port.
                if (!ctx.excall_port || !ctx.nonce_provider)
                    return fail(TxStatus::FAILED_EXCALL_NO_RESPONSE);
                Nonce nonce = ctx.nonce_provider(cursor);
                std::string uri = resolve_uri(uri_template, nonce);
                auto got = ctx.excall_port->call(uri);
                if (!got) return fail(TxStatus::FAILED_EXCALL_NO_RESPONSE);
                if (got->response.size() > kMaxResponseSize ||
                    !crypto::verify_response(got->public_key, got->response,
                                             nonce, got->signature))
                    return fail(TxStatus::FAILED_EXCALL_UNVERIFIED);
                if (ctx.key_check && !ctx.key_check(uri, got->public_key))
                    return fail(TxStatus::FAILED_EXCALL_UNVERIFIED);
                VerifiableExternalCall tuple;
                tuple.request_uri = uri;
                tuple.request_nonce = nonce;
                tuple.public_key = got->public_key;
                tuple.response = got->response;
                tuple.signature = got->signature;
                scratch.set_response(tuple.response);
                m.push(word_from_u64(
                    tuple.response.empty() ? 0 : tuple.response[0]));
                res.performed_calls.push_back(std::move(tuple));
                res.excalls_consumed = ++cursor;
                break;
            }
            default:
                return fail(TxStatus::FAILED_EXEC);
        }
    }
done:
    scratch.commit();
    return res;
}

}  // namespace excall::vm
