#include "zcl_app.hpp"

int main(int argc, char** argv) { return zcl::cli::run(argc, argv); }
