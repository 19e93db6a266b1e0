#include "dbhcam/cli.hpp"

int main(int argc, char** argv) { return dbhcam::cli::run(argc, argv); }
