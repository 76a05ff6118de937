#pragma once

#include "helmstab/campaign/config.hpp"
#include "helmstab/campaign/plots.hpp"
#include "helmstab/campaign/run.hpp"
#include "helmstab/campaign/validate.hpp"
