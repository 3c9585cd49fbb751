#pragma once

#include "scot/backend.hpp"
#include "scot/config.hpp"
#include "scot/core.hpp"
#include "scot/data.hpp"
#include "scot/drafting.hpp"
#include "scot/errors.hpp"
#include "scot/grading.hpp"
#include "scot/http_backend.hpp"
#include "scot/metrics.hpp"
#include "scot/pipeline.hpp"
#include "scot/selection.hpp"
#include "scot/sim_backend.hpp"
#include "scot/trace_io.hpp"
