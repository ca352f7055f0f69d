#pragma once

#include <advbal/adversarial.hpp>
#include <advbal/baselines.hpp>
#include <advbal/benchgen.hpp>
#include <advbal/classifiers.hpp>
#include <advbal/core.hpp>
#include <advbal/csv.hpp>
#include <advbal/diagnostics.hpp>
#include <advbal/error.hpp>
#include <advbal/experiment.hpp>
#include <advbal/kernels.hpp>
#include <advbal/rng.hpp>
