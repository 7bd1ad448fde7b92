#pragma once

// Umbrella header.

#include "benford.hpp"
#include "benq_file.hpp"
#include "levels.hpp"
#include "metrics.hpp"
#include "policy.hpp"
#include "quantizer.hpp"
#include "report.hpp"
#include "safetensors.hpp"
#include "synth.hpp"
#include "tensor.hpp"

namespace benq {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace benq
