#pragma once
// Convenience include for the whole library.

#include "dsteval/core.hpp"
#include "dsteval/metrics.hpp"
#include "dsteval/trace.hpp"
#include "dsteval/synth.hpp"
#include "dsteval/io.hpp"
