#pragma once

#include "rapique/config.hpp"
#include "rapique/deep_features.hpp"
#include "rapique/error.hpp"
#include "rapique/evaluation.hpp"
#include "rapique/features.hpp"
#include "rapique/image.hpp"
#include "rapique/nss.hpp"
#include "rapique/parallel.hpp"
#include "rapique/pixel_maps.hpp"
#include "rapique/random.hpp"
#include "rapique/regressor.hpp"
#include "rapique/synthetic.hpp"
#include "rapique/temporal.hpp"
#include "rapique/video_io.hpp"
