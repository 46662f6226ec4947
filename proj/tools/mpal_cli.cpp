#include <cstdio>

int main() {
    std::puts("mpal: placeholder");
    return 0;
}
