#pragma once

// Umbrella header for the LCCDE intrusion-detection ensemble library.

#include "lccde/core.hpp"
#include "lccde/ensemble.hpp"
#include "lccde/eval.hpp"
#include "lccde/ingest.hpp"
#include "lccde/learners.hpp"
#include "lccde/model_io.hpp"
