#pragma once

#include "swarmloc/bounds.hpp"
#include "swarmloc/completion.hpp"
#include "swarmloc/datamodel.hpp"
#include "swarmloc/errors.hpp"
#include "swarmloc/experiment.hpp"
#include "swarmloc/hypergeometric.hpp"
#include "swarmloc/localizability.hpp"
#include "swarmloc/matching.hpp"
#include "swarmloc/overlay.hpp"
#include "swarmloc/rng.hpp"
#include "swarmloc/text.hpp"
#include "swarmloc/traffic.hpp"
