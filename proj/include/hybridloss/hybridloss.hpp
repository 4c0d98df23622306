#pragma once

#include "hybridloss/chain.hpp"
#include "hybridloss/consistency.hpp"
#include "hybridloss/core.hpp"
#include "hybridloss/experiments.hpp"
#include "hybridloss/io.hpp"
#include "hybridloss/losses.hpp"
#include "hybridloss/metrics.hpp"
#include "hybridloss/numeric.hpp"
#include "hybridloss/optim.hpp"
#include "hybridloss/pac_bayes.hpp"
#include "hybridloss/rng.hpp"
#include "hybridloss/synthdata.hpp"
