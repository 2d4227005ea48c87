#pragma once

#include "korolat/approx.hpp"
#include "korolat/cbc.hpp"
#include "korolat/error_eval.hpp"
#include "korolat/errors.hpp"
#include "korolat/experiments.hpp"
#include "korolat/korobov.hpp"
#include "korolat/lattice.hpp"
#include "korolat/math.hpp"
#include "korolat/rng.hpp"
#include "korolat/shifts.hpp"
