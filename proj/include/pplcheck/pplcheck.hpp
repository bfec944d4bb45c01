#pragma once

#include "pplcheck/backend.hpp"
#include "pplcheck/classify.hpp"
#include "pplcheck/convert.hpp"
#include "pplcheck/core_data.hpp"
#include "pplcheck/error.hpp"
#include "pplcheck/experiment.hpp"
#include "pplcheck/manifest.hpp"
#include "pplcheck/metrics.hpp"
#include "pplcheck/negation.hpp"
#include "pplcheck/ngram.hpp"
#include "pplcheck/ranking.hpp"
#include "pplcheck/remote_backend.hpp"
#include "pplcheck/scoring.hpp"
#include "pplcheck/split.hpp"
