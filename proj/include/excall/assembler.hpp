#pragma once

#include <stdexcept>
#include <string>

#include "excall/types.hpp"

namespace excall::vm {

struct AssembleError : std::runtime_error {
    AssembleError(int line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what),
          line(line) {}
    int line;
};

// Line-oriented assembly:
//   ; comment
//   .func name          -- next instruction starts entry selector(name)
//   label:              -- jump target
//   PUSH8 123 | PUSH8 0x1F | PUSH8 @label
//   PUSHB "text" | PUSHB 0xDEADBEEF
//   EXCALL "http://host/path?nonce={nonce}"
//   other mnemonics take no operand
ContractProgram assemble(const std::string& source);

// Output is valid assembler input; assemble(disassemble(p)) reproduces
// p's bytecode and entry points (label names aside).
std::string disassemble(const ContractProgram& program);

}  // namespace excall::vm
