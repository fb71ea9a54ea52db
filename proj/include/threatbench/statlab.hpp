#pragma once

#include "threatbench/statlab/effects.hpp"
#include "threatbench/statlab/special.hpp"
#include "threatbench/statlab/tests.hpp"
