#pragma once

#include "threatbench/textmetrics/lexicon.hpp"
#include "threatbench/textmetrics/metric_vector.hpp"
#include "threatbench/textmetrics/readability.hpp"
#include "threatbench/textmetrics/similarity.hpp"
#include "threatbench/textmetrics/tokenize.hpp"
