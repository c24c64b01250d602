#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace subens::cli {

// Raised for malformed invocations (unknown command or flag); mapped to exit
// code 2, while contract errors from the library map to 1.
class usage_error : public std::runtime_error {
 public:
  explicit usage_error(const std::string& what) : std::runtime_error(what) {}
};

std::string usage_text();

// Commands: pretrain, probe, eval-ood, corrupt-eval, ablate, gradcheck,
// report. Shared flags: --config PATH, --seed N, --out DIR,
// --override key=value (repeatable). ablate adds --sweep key=v1,v2,...
// SUBNET_ENSEMBLE_THREADS caps ablate's worker threads.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace subens::cli
