#pragma once

#include "atb/analysis.hpp"
#include "atb/backup.hpp"
#include "atb/experiment.hpp"
#include "atb/learner.hpp"
#include "atb/mdp.hpp"
#include "atb/seed.hpp"
#include "atb/verify.hpp"
