#pragma once

// Umbrella header: the executable dense model dichotomy.
//
// Given measures g <= ν on a finite universe and a finite family F of
// bounded test functions, either construct a bounded measure g1 with
// mean(g1) = mean(g) that is ε-indistinguishable from g under F, or
// produce at most k members of F whose product ε'-distinguishes ν from
// the constant-1 function.

#include "densemodel/core.hpp"
#include "densemodel/errors.hpp"
#include "densemodel/exact.hpp"
#include "densemodel/game.hpp"
#include "densemodel/io.hpp"
#include "densemodel/pipeline.hpp"
#include "densemodel/rng.hpp"
#include "densemodel/steppoly.hpp"
#include "densemodel/testkit.hpp"
#include "densemodel/threshold.hpp"
#include "densemodel/util.hpp"
