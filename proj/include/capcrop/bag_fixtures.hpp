#pragma once

// Caption-loss fixtures for cross-language checks. See docs/protocol.md.

#include <cstdint>
#include <string>

namespace capcrop {

// One JSON object per line: id, eps, the user bag, the generated step
// distributions and the expected caption loss. Every fourth fixture holds
// exact zeros to exercise the log floor.
std::string bag_loss_fixtures(int count, std::uint64_t seed, int vocab_size);

}  // namespace capcrop
