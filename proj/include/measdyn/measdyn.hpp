#pragma once

#include "measdyn/measure.hpp"
#include "measdyn/flat_metric.hpp"
#include "measdyn/char_flow.hpp"
#include "measdyn/random.hpp"
#include "measdyn/rates.hpp"
#include "measdyn/models.hpp"
#include "measdyn/picard.hpp"
#include "measdyn/presets.hpp"
#include "measdyn/io.hpp"
#include "measdyn/diagnostics.hpp"
