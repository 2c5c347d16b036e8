#include "cct/model.hpp"
#include "cct/tasks.hpp"
#include "cct/trainer.hpp"
#include "cct/nngen.hpp"
int main(){return 0;}
