#pragma once

#include "rsaas/error.hpp"
#include "rsaas/platform.hpp"
#include "rsaas/sim/time.hpp"
#include "rsaas/sim/rng.hpp"
#include "rsaas/sim/contention.hpp"
#include "rsaas/sim/engine.hpp"
#include "rsaas/rtds/scheduler.hpp"
#include "rsaas/guest/scheduler.hpp"
#include "rsaas/guest/scenario.hpp"
#include "rsaas/machine.hpp"
#include "rsaas/app/protocol.hpp"
#include "rsaas/app/workload.hpp"
#include "rsaas/doe/design.hpp"
#include "rsaas/doe/experiment.hpp"
#include "rsaas/stats/ttest.hpp"
#include "rsaas/report/config.hpp"
#include "rsaas/report/samples.hpp"
#include "rsaas/report/summary.hpp"
