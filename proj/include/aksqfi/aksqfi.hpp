#pragma once

#include "aksqfi/errors.hpp"
#include "aksqfi/linalg.hpp"
#include "aksqfi/qfi.hpp"
#include "aksqfi/benchmark_family.hpp"
#include "aksqfi/rng.hpp"
#include "aksqfi/shadow.hpp"
#include "aksqfi/krylov.hpp"
#include "aksqfi/estimator.hpp"
#include "aksqfi/stopping.hpp"
#include "aksqfi/controller.hpp"
#include "aksqfi/harness.hpp"
#include "aksqfi/csv.hpp"
#include "aksqfi/config.hpp"
