#pragma once

#include "fermi/error.hpp"
#include "fermi/units.hpp"
#include "fermi/program.hpp"
#include "fermi/executor.hpp"
#include "fermi/record.hpp"
#include "fermi/metrics.hpp"
#include "fermi/kb.hpp"
#include "fermi/random.hpp"
#include "fermi/parallel.hpp"
#include "fermi/synthgen.hpp"
#include "fermi/tasks.hpp"
#include "fermi/baselines.hpp"
