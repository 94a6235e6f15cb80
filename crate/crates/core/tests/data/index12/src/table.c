#define SLOTS 16

static int keys[SLOTS];
static int vals[SLOTS];

static int slot(int key)
{
    return (unsigned)key % SLOTS;
}

int table_put(int key, int val)
{
    keys[slot(key)] = key;
    vals[slot(key)] = val;
    return 0;
}

int table_get(int key, int *val)
{
    if (keys[slot(key)] != key)
        return -1;
    *val = vals[slot(key)];
    return 0;
}

void table_clear(void)
{
    int i;

    for (i = 0; i < SLOTS; i++)
        keys[i] = vals[i] = 0;
}
