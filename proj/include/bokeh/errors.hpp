// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace bokeh {

// Module errors carry a stable machine-readable code (e.g. "MODE_MISMATCH")
// that the CLI surfaces verbatim.
class Error : public std::runtime_error {
  public:
    Error(std::string code, const std::string &message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}
    const std::string &code() const { return code_; }

  private:
    std::string code_;
};

} // namespace bokeh
