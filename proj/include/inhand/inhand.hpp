#pragma once

#include "inhand/cloud.hpp"
#include "inhand/error.hpp"
#include "inhand/geom.hpp"
#include "inhand/grasp.hpp"
#include "inhand/hannes.hpp"
#include "inhand/io.hpp"
#include "inhand/odom.hpp"
#include "inhand/pipeline.hpp"
#include "inhand/rng.hpp"
#include "inhand/scene.hpp"
#include "inhand/select.hpp"
