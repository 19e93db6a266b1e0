#pragma once

#include "dbhcam/alignment.hpp"
#include "dbhcam/camera.hpp"
#include "dbhcam/error.hpp"
#include "dbhcam/geometry.hpp"
#include "dbhcam/manifest.hpp"
#include "dbhcam/mask.hpp"
#include "dbhcam/metrics.hpp"
#include "dbhcam/pipeline.hpp"
#include "dbhcam/png_io.hpp"
#include "dbhcam/protocol.hpp"
#include "dbhcam/segmentation.hpp"
#include "dbhcam/service.hpp"
#include "dbhcam/synthetic.hpp"
#include "dbhcam/units.hpp"
#include "dbhcam/version.hpp"
