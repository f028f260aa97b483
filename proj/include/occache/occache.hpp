#pragma once

#include "occache/codec.hpp"
#include "occache/dynamics.hpp"
#include "occache/formulas.hpp"
#include "occache/harness.hpp"
#include "occache/oracle.hpp"
#include "occache/policies.hpp"
#include "occache/rng.hpp"
#include "occache/trace.hpp"
#include "occache/verify.hpp"
