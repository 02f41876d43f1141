#pragma once

#include "satqkd/campaign.hpp"
#include "satqkd/config.hpp"
#include "satqkd/counts.hpp"
#include "satqkd/finitekey.hpp"
#include "satqkd/link.hpp"
#include "satqkd/optimize.hpp"
#include "satqkd/orbit.hpp"
#include "satqkd/quadrature.hpp"
#include "satqkd/results.hpp"
#include "satqkd/stats.hpp"
