// Umbrella header.
#pragma once

#include "ensync/common.hpp"
#include "ensync/ensemble.hpp"
#include "ensync/io.hpp"
#include "ensync/kalman.hpp"
#include "ensync/oracle.hpp"
#include "ensync/synth.hpp"
