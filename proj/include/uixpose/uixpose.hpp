#pragma once

// Umbrella header.

#include "uixpose/core.hpp"
#include "uixpose/evidence.hpp"
#include "uixpose/intent.hpp"
#include "uixpose/telemetry.hpp"
#include "uixpose/stream_stats.hpp"
#include "uixpose/channels.hpp"
#include "uixpose/alignment.hpp"
#include "uixpose/calibration.hpp"
#include "uixpose/config.hpp"
#include "uixpose/providers.hpp"
#include "uixpose/pipeline.hpp"
#include "uixpose/fixtures.hpp"
