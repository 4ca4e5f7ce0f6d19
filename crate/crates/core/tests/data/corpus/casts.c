int mix(signed char x, float y) {
    long wide = x;
    double d = y;
    d = d + (double)wide;
    d = d * 2.5;
    int back = (int)d;
    return back - x;
}

int main(void) {
    float f = (float)1.5;
    return mix((signed char)7, f);
}
