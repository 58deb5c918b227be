#pragma once

#include "roughwave/error.hpp"
#include "roughwave/roots.hpp"
#include "roughwave/gauss.hpp"
#include "roughwave/grid.hpp"
#include "roughwave/parallel.hpp"
#include "roughwave/model_core.hpp"
#include "roughwave/nonlocal_ops.hpp"
#include "roughwave/profile.hpp"
#include "roughwave/profile_m1.hpp"
#include "roughwave/profile_m2.hpp"
#include "roughwave/simulator.hpp"
#include "roughwave/scenario.hpp"
#include "roughwave/csv.hpp"
#include "roughwave/plot_script.hpp"
#include "roughwave/commands.hpp"
