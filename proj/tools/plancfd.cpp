#include "plancfd/app.hpp"

int main(int argc, char** argv) { return plancfd::run_app(argc, argv); }
