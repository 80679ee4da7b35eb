#pragma once
#include "errors.hpp"
#include "core.hpp"
#include "forcefield.hpp"
#include "cells.hpp"
#include "balance.hpp"
#include "dynamics.hpp"
#include "config.hpp"
#include "scenario.hpp"
#include "runtime.hpp"
#include "montecarlo.hpp"
#include "benchmark.hpp"
#include "io.hpp"
#include "simulation.hpp"
