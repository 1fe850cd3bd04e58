#include "excall/assembler.hpp"

#include <sstream>

#include "excall/crypto.hpp"
#include "excall/vm.hpp"

namespace excall::vm {

namespace {

struct Token {
    std::string text;
};

std::string strip(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_str = !in_str;
        else if (line[i] == ';' && !in_str) return line.substr(0, i);
    }
    return line;
}

const std::map<std::string, uint8_t> kMnemonics = {
    {"STOP", OP_STOP},     {"PUSH8", OP_PUSH8}, {"PUSHB", OP_PUSHB},
    {"DUP", OP_DUP},       {"POP", OP_POP},     {"ADD", OP_ADD},
    {"SUB", OP_SUB},       {"EQ", OP_EQ},       {"LT", OP_LT},
    {"NOT", OP_NOT},       {"JUMP", OP_JUMP},   {"JUMPI", OP_JUMPI},
    {"CALLER", OP_CALLER}, {"SLOAD", OP_SLOAD}, {"SSTORE", OP_SSTORE},
    {"EMIT", OP_EMIT},     {"EXCALL", OP_EXCALL}, {"REVERT", OP_REVERT},
};

struct PendingLabel {
    std::string name;
    size_t patch_at;  // offset of the 8-byte immediate
    int line;
};

bool parse_u64(const std::string& t, uint64_t& out) {
    try {
        size_t idx = 0;
        if (t.rfind("0x", 0) == 0) {
            out = std::stoull(t.substr(2), &idx, 16);
            return idx == t.size() - 2;
        }
        out = std::stoull(t, &idx, 10);
        return idx == t.size();
    } catch (...) {
        return false;
    }
}

std::optional<std::string> parse_quoted(const std::string& t) {
    if (t.size() < 2 || t.front() != '"' || t.back() != '"')
        return std::nullopt;
    return t.substr(1, t.size() - 2);
}

}  // namespace

ContractProgram assemble(const std::string& source) {
    ContractProgram p;
    std::map<std::string, uint32_t> labels;
    std::vector<PendingLabel> fixups;
    std::vector<std::pair<std::array<uint8_t, 4>, int>> pending_entries;

    std::istringstream in(source);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = strip(strip_comment(raw));
        if (line.empty()) continue;

        if (line.back() == ':') {
            std::string name = strip(line.substr(0, line.size() - 1));
            if (name.empty() || labels.count(name))
                throw AssembleError(lineno, "bad or duplicate label");
            labels[name] = static_cast<uint32_t>(p.bytecode.size());
            continue;
        }

        if (line.rfind(".func ", 0) == 0) {
            std::string name = strip(line.substr(6));
            if (name.empty()) throw AssembleError(lineno, ".func needs name");
            pending_entries.push_back({selector(name), lineno});
            continue;
        }
        if (line.rfind(".entry ", 0) == 0) {
            std::string hexsel = strip(line.substr(7));
            auto sel = fixed_from_hex<4>(
                hexsel.rfind("0x", 0) == 0 ? hexsel.substr(2) : hexsel);
            if (!sel) throw AssembleError(lineno, ".entry needs 4-byte hex");
            pending_entries.push_back({*sel, lineno});
            continue;
        }

        for (auto& [sel, declared_at] : pending_entries)
            p.entry_points[sel] = static_cast<uint32_t>(p.bytecode.size());
        pending_entries.clear();

        std::string mnem = line;
        std::string operand;
        size_t sp = line.find_first_of(" \t");
        if (sp != std::string::npos) {
            mnem = line.substr(0, sp);
            operand = strip(line.substr(sp));
        }

        auto it = kMnemonics.find(mnem);
        if (it == kMnemonics.end())
            throw AssembleError(lineno, "unknown mnemonic '" + mnem + "'");
        uint8_t op = it->second;

        switch (op) {
            case OP_PUSH8: {
                p.bytecode.push_back(op);
                if (operand.empty())
                    throw AssembleError(lineno, "PUSH8 needs operand");
                if (operand[0] == '@') {
                    fixups.push_back(
                        {operand.substr(1), p.bytecode.size(), lineno});
                    p.bytecode.insert(p.bytecode.end(), 8, 0);
                } else {
                    uint64_t v;
                    if (!parse_u64(operand, v))
                        throw AssembleError(lineno, "bad PUSH8 operand");
                    for (int i = 0; i < 8; ++i)
                        p.bytecode.push_back(uint8_t(v >> (8 * i)));
                }
                break;
            }
            case OP_PUSHB: {
                Bytes data;
                if (auto q = parse_quoted(operand)) {
                    data = to_bytes(*q);
                } else if (operand.rfind("0x", 0) == 0) {
                    auto h = hex_decode(operand.substr(2));
                    if (!h) throw AssembleError(lineno, "bad PUSHB hex");
                    data = *h;
                } else {
                    throw AssembleError(lineno, "PUSHB needs string or hex");
                }
                if (data.size() > 32)
                    throw AssembleError(lineno, "PUSHB operand > 32 bytes");
                p.bytecode.push_back(op);
                p.bytecode.push_back(uint8_t(data.size()));
                p.bytecode.insert(p.bytecode.end(), data.begin(), data.end());
                break;
            }
            case OP_EXCALL: {
                auto q = parse_quoted(operand);
                if (!q) throw AssembleError(lineno, "EXCALL needs quoted URI");
                if (q->rfind("http", 0) != 0)
                    throw AssembleError(lineno,
                                        "EXCALL URI must start with http");
                if (q->size() > 4096)
                    throw AssembleError(lineno, "EXCALL URI too long");
                p.bytecode.push_back(op);
                p.bytecode.push_back(uint8_t(q->size() & 0xFF));
                p.bytecode.push_back(uint8_t(q->size() >> 8));
                p.bytecode.insert(p.bytecode.end(), q->begin(), q->end());
                break;
            }
            default:
                if (!operand.empty())
                    throw AssembleError(lineno, mnem + " takes no operand");
                p.bytecode.push_back(op);
                break;
        }
    }

    for (auto& [sel, declared_at] : pending_entries)
        throw AssembleError(declared_at, ".func/.entry at end of file");

    for (const auto& f : fixups) {
        auto it = labels.find(f.name);
        if (it == labels.end())
            throw AssembleError(f.line, "unresolved label '" + f.name + "'");
        uint64_t v = it->second;
        for (int i = 0; i < 8; ++i)
            p.bytecode[f.patch_at + i] = uint8_t(v >> (8 * i));
    }

    validate_program(p);
    return p;
}

std::string disassemble(const ContractProgram& program) {
    std::ostringstream out;
    const Bytes& bc = program.bytecode;
    std::map<uint32_t, std::vector<std::array<uint8_t, 4>>> entries_at;
    for (const auto& [sel, off] : program.entry_points)
        entries_at[off].push_back(sel);

    size_t pc = 0;
    while (pc < bc.size()) {
        if (auto it = entries_at.find(uint32_t(pc)); it != entries_at.end())
            for (const auto& sel : it->second)
                out << ".entry 0x" << hex_encode(sel) << "\n";
        uint8_t op = bc[pc];
        switch (op) {
            case OP_PUSH8: {
                uint64_t v = 0;
                for (int i = 0; i < 8; ++i)
                    v |= uint64_t(bc[pc + 1 + i]) << (8 * i);
                out << "PUSH8 " << v << "\n";
                pc += 9;
                break;
            }
            case OP_PUSHB: {
                uint8_t len = bc[pc + 1];
                out << "PUSHB 0x"
                    << hex_encode({bc.data() + pc + 2, len}) << "\n";
                pc += 2 + len;
                break;
            }
            case OP_EXCALL: {
                uint16_t len =
                    uint16_t(bc[pc + 1]) | (uint16_t(bc[pc + 2]) << 8);
                out << "EXCALL \""
                    << std::string(bc.begin() + pc + 3,
                                   bc.begin() + pc + 3 + len)
                    << "\"\n";
                pc += 3 + len;
                break;
            }
            default: {
                for (const auto& [name, code] : kMnemonics)
                    if (code == op) {
                        out << name << "\n";
                        break;
                    }
                pc += 1;
                break;
            }
        }
    }
    return out.str();
}

}  // namespace excall::vm
