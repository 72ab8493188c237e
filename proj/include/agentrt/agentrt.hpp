#pragma once

// Umbrella header. Image, scene, and sim-env headers pull in OpenCV and are
// included directly by the components that need them.
#include "agentrt/action.hpp"
#include "agentrt/context.hpp"
#include "agentrt/executor.hpp"
#include "agentrt/harness.hpp"
#include "agentrt/keys.hpp"
#include "agentrt/latency.hpp"
#include "agentrt/pipeline.hpp"
#include "agentrt/specdecode.hpp"
#include "agentrt/tokenizer.hpp"
#include "agentrt/wire.hpp"
