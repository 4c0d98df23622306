#include "hybridloss/hybridloss.hpp"
int main() { return 0; }
