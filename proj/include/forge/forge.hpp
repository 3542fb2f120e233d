#pragma once

// Umbrella header for the culture-forge pipeline toolkit.

#include "forge/augmentation.hpp"
#include "forge/config.hpp"
#include "forge/dataset_assembly.hpp"
#include "forge/error.hpp"
#include "forge/eval_harness.hpp"
#include "forge/metrics.hpp"
#include "forge/mock_providers.hpp"
#include "forge/openai_client.hpp"
#include "forge/pipeline.hpp"
#include "forge/providers.hpp"
#include "forge/seed_corpus.hpp"
#include "forge/tagger.hpp"
#include "forge/util.hpp"
