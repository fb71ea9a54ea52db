#pragma once

#include "threatbench/reporter/config.hpp"
#include "threatbench/reporter/pipeline.hpp"
#include "threatbench/reporter/render.hpp"
#include "threatbench/reporter/tables.hpp"
